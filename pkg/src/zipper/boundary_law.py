"""Boundary laws: positive solutions of z_x = prod_{y in S(x)} (theta z_y + eta).

Three shapes of law are supported.  :class:`ConstantLaw` is translation
invariant, :class:`LevelLaw` depends only on the depth |x|, and
:class:`ExplicitLaw` stores one value per vertex up to a finite horizon.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Mapping, Sequence

from zipper import tree
from zipper.model import ModelParams
from zipper.tree import VertexId

DEFAULT_TOL = 1e-12
CRITICAL_BAND = 1e-10
MAX_ITER = 200


class HorizonExceeded(ValueError):
    """A law was queried beyond the depth at which it is materialized."""


class NumericFailure(RuntimeError):
    pass


class BoundaryLaw:
    """Common interface of the three law shapes."""

    horizon: float = math.inf

    def value(self, v: VertexId) -> float:
        raise NotImplementedError

    def level_value(self, depth: int) -> float:
        """Value at ``depth`` for laws that only depend on depth."""
        raise TypeError(f"{type(self).__name__} is not level-uniform")

    @property
    def level_uniform(self) -> bool:
        return False

    def perturbed(self, delta: float) -> "BoundaryLaw":
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class ConstantLaw(BoundaryLaw):
    z: float
    horizon: float = math.inf

    def __post_init__(self) -> None:
        if not self.z > 0:
            raise ValueError(f"boundary law values must be positive, got {self.z}")

    def value(self, v: VertexId) -> float:
        if v.is_root:
            raise ValueError("boundary laws live on non-root vertices")
        return self.z

    def level_value(self, depth: int) -> float:
        return self.z

    @property
    def level_uniform(self) -> bool:
        return True

    def perturbed(self, delta: float) -> "ConstantLaw":
        return ConstantLaw(self.z + delta)

    def to_dict(self) -> dict:
        return {"variant": "constant", "z": self.z}


@dataclass(frozen=True)
class LevelLaw(BoundaryLaw):
    """Values ``levels[d - 1]`` at depth d = 1..len(levels), then ``tail`` if given."""

    levels: tuple[float, ...]
    tail: float | None = None
    exponents: tuple[Fraction, ...] | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        if not self.levels:
            raise ValueError("a level law needs at least one level")
        if any(not z > 0 for z in self.levels) or (self.tail is not None and not self.tail > 0):
            raise ValueError("boundary law values must be positive")

    @property
    def horizon(self) -> int:  # type: ignore[override]
        return len(self.levels)

    def level_value(self, depth: int) -> float:
        if depth < 1:
            raise ValueError("boundary laws live on non-root vertices")
        if depth <= len(self.levels):
            return self.levels[depth - 1]
        if self.tail is None:
            raise HorizonExceeded(f"depth {depth} beyond horizon {len(self.levels)}")
        return self.tail

    def value(self, v: VertexId) -> float:
        return self.level_value(v.depth)

    @property
    def level_uniform(self) -> bool:
        return True

    def perturbed(self, delta: float) -> "LevelLaw":
        tail = None if self.tail is None else self.tail + delta
        return LevelLaw(tuple(z + delta for z in self.levels), tail)

    def to_dict(self) -> dict:
        return {
            "variant": "level",
            "values_by_depth": {str(d): z for d, z in enumerate(self.levels, start=1)},
            "tail": self.tail,
        }


@dataclass(frozen=True)
class ExplicitLaw(BoundaryLaw):
    values: Mapping[VertexId, float]
    horizon: int = 0

    def __post_init__(self) -> None:
        if any(not z > 0 for z in self.values.values()):
            raise ValueError("boundary law values must be positive")

    def value(self, v: VertexId) -> float:
        try:
            return self.values[v]
        except KeyError:
            raise HorizonExceeded(f"no value stored for vertex {v}") from None

    def perturbed(self, delta: float) -> "ExplicitLaw":
        return ExplicitLaw({v: z + delta for v, z in self.values.items()}, self.horizon)

    def to_dict(self) -> dict:
        return {"variant": "explicit", "values_by_vertex": {v.label(): z for v, z in sorted(self.values.items())}}


def law_from_dict(data: Mapping) -> BoundaryLaw:
    variant = data["variant"]
    if variant == "constant":
        return ConstantLaw(float(data["z"]))
    if variant == "level":
        by_depth = data["values_by_depth"]
        levels = tuple(float(by_depth[str(d)]) for d in range(1, len(by_depth) + 1))
        tail = data.get("tail")
        return LevelLaw(levels, None if tail is None else float(tail))
    if variant == "explicit":
        values = {VertexId.parse(key): float(z) for key, z in data["values_by_vertex"].items()}
        return ExplicitLaw(values, max((v.depth for v in values), default=0))
    raise ValueError(f"unknown law variant {variant!r}")


# ----------------------------------------------------------------------------
# residuals


def residual(law: BoundaryLaw, x: VertexId, p: ModelParams) -> float:
    """|z_x - prod_{y in S(x)} (theta z_y + eta)| at a non-root vertex."""
    if x.is_root:
        raise ValueError("the functional equation is imposed on non-root vertices only")
    if x.depth + 1 > law.horizon:
        raise HorizonExceeded(f"residual at depth {x.depth} needs values at depth {x.depth + 1}")
    theta, eta = p.theta, p.eta
    rhs = 1.0
    for y in tree.children(x, p.k):
        rhs *= theta * law.value(y) + eta
    return abs(law.value(x) - rhs)


def max_residual(law: BoundaryLaw, p: ModelParams, depth: int) -> float:
    """Largest residual over all vertices at depths 1..depth."""
    worst = 0.0
    for d in range(1, depth + 1):
        if law.level_uniform:
            worst = max(worst, residual(law, VertexId((0,) * d), p))
        else:
            for x in tree.generation(p.k, d):
                worst = max(worst, residual(law, x, p))
    return worst


# ----------------------------------------------------------------------------
# constant solutions


@dataclass(frozen=True)
class SolutionSet:
    """Positive roots of z = (theta z + eta)**k at one parameter point."""

    k: int
    theta: float
    eta: float
    roots: tuple[float, ...]
    eta_c: float | None
    regime: str

    @property
    def count(self) -> int:
        return len(self.roots)

    def residuals(self) -> list[float]:
        return [abs(constant_equation(z, self.k, self.theta, self.eta)) for z in self.roots]

    def to_dict(self) -> dict:
        return {
            "count": self.count,
            "roots": list(self.roots),
            "k": self.k,
            "theta": self.theta,
            "eta": self.eta,
            "eta_c": self.eta_c,
            "regime": self.regime,
        }


def constant_equation(z: float, k: int, theta: float, eta: float) -> float:
    """f_k(z) = (theta z + eta)**k - z."""
    return (theta * z + eta) ** k - z


def eta_critical(k: int, theta: float) -> float:
    """(k-1) / (k (k theta)**(1/(k-1))), the threshold for positive constant roots."""
    if k < 2:
        raise ValueError("eta_c is defined for k >= 2")
    if not theta > 0:
        raise ValueError("theta must be positive")
    return (k - 1) / (k * (k * theta) ** (1.0 / (k - 1)))


def minimizer(k: int, theta: float, eta: float) -> float:
    """Stationary point of f_k on the positive axis (may be <= 0)."""
    return ((k * theta) ** (-1.0 / (k - 1)) - eta) / theta


def is_critical(eta: float, eta_c: float, band: float = CRITICAL_BAND) -> bool:
    return abs(eta - eta_c) <= band * max(1.0, eta_c)


def _safe_newton(f: Callable[[float], float], df: Callable[[float], float], lo: float, hi: float) -> float:
    """Root of ``f`` in a sign-changing bracket, Newton steps kept inside by bisection."""
    f_lo, f_hi = f(lo), f(hi)
    if f_lo == 0:
        return lo
    if f_hi == 0:
        return hi
    if (f_lo > 0) == (f_hi > 0):
        raise NumericFailure(f"[{lo}, {hi}] does not bracket a root")
    # orient so that f(a) < 0 < f(b)
    a, b = (lo, hi) if f_lo < 0 else (hi, lo)
    x = 0.5 * (lo + hi)
    for _ in range(MAX_ITER):
        fx = f(x)
        if fx == 0:
            return x
        if fx < 0:
            a = x
        else:
            b = x
        dfx = df(x)
        step_ok = False
        if dfx != 0:
            x_new = x - fx / dfx
            step_ok = min(a, b) < x_new < max(a, b)
        if not step_ok:
            x_new = 0.5 * (a + b)
        if x_new == x or abs(a - b) <= 4 * math.ulp(max(abs(a), abs(b))):
            return x_new
        x = x_new
    raise NumericFailure("root refinement did not converge")


def _polish(z: float, k: int, theta: float, eta: float, lo: float, hi: float) -> float:
    """Newton steps with f evaluated exactly in rationals, rounding only the iterate.

    Near the double root f loses all relative precision in floating point;
    exact evaluation recovers a root accurate to a few ulps.
    """
    t, e = Fraction(theta), Fraction(eta)
    for _ in range(8):
        x = Fraction(z)
        u = t * x + e
        u_pow = u ** (k - 1)
        f = u_pow * u - x
        df = k * t * u_pow - 1
        if f == 0 or df == 0:
            break
        z_new = float(x - f / df)
        if z_new == z or not lo <= z_new <= hi:
            break
        z = z_new
    return z


def solve_constant_theta_eta(
    k: int,
    theta: float,
    eta: float,
    tol: float = DEFAULT_TOL,
    band: float = CRITICAL_BAND,
) -> SolutionSet:
    """All positive roots of z = (theta z + eta)**k.

    Roots are accepted when |f_k(z)| <= tol * max(1, z).  Inside the
    critical band around eta_c the double root is returned once.  Passing
    ``band=0`` disables that snapping.
    """
    if not theta > 0 or not eta >= 0 or not tol > 0:
        raise ValueError("need theta > 0, eta >= 0, tol > 0")
    if k == 1:
        if eta > 0 and theta < 1:
            roots: tuple[float, ...] = (eta / (1.0 - theta),)
        else:
            roots = ()
        return SolutionSet(k, theta, eta, roots, None, "not_applicable")

    eta_c = eta_critical(k, theta)
    if eta == 0:
        return SolutionSet(k, theta, eta, (theta ** (-k / (k - 1)),), eta_c, "below_critical")
    if band > 0 and is_critical(eta, eta_c, band):
        return SolutionSet(k, theta, eta, (minimizer(k, theta, eta),), eta_c, "critical")
    if eta > eta_c:
        return SolutionSet(k, theta, eta, (), eta_c, "above_critical")

    def f(z: float) -> float:
        return constant_equation(z, k, theta, eta)

    def df(z: float) -> float:
        return k * theta * (theta * z + eta) ** (k - 1) - 1.0

    z_min = minimizer(k, theta, eta)
    if f(z_min) >= 0:
        # eta within rounding of eta_c with snapping disabled
        return SolutionSet(k, theta, eta, (z_min,), eta_c, "critical")
    # f is convex: the tangent at 0 and the secant to z_min bracket the small root
    f0, f_min = f(0.0), f(z_min)
    lo = f0 / (1.0 - df(0.0)) if df(0.0) < 0 else 0.0
    hi = f0 * z_min / (f0 - f_min)
    lo, hi = (lo, hi) if f(lo) > 0 and f(hi) <= 0 else (0.0, z_min)
    small = _safe_newton(f, df, lo, hi)
    upper = max(2.0 * z_min, 1.0)
    for _ in range(MAX_ITER):
        if f(upper) > 0:
            break
        upper *= 2.0
    else:
        raise NumericFailure("could not bracket the larger root")
    large = _safe_newton(f, df, z_min, upper)
    roots = (_polish(small, k, theta, eta, 0.0, z_min), _polish(large, k, theta, eta, z_min, upper))
    for z in roots:
        if abs(f(z)) > tol * max(1.0, z):
            raise NumericFailure(f"root {z} has residual {abs(f(z))} above tolerance {tol}")
    return SolutionSet(k, theta, eta, roots, eta_c, "below_critical")


def solve_constant(p: ModelParams, tol: float = DEFAULT_TOL, band: float = CRITICAL_BAND) -> SolutionSet:
    return solve_constant_theta_eta(p.k, p.theta, p.eta, tol=tol, band=band)


def count_solutions(k: int, theta: float, eta: float, band: float = CRITICAL_BAND) -> int:
    """Number of positive constant roots: 0 above eta_c, 1 at eta_c, 2 below."""
    if k == 1 or eta == 0:
        return solve_constant_theta_eta(k, theta, eta).count
    eta_c = eta_critical(k, theta)
    if band > 0 and is_critical(eta, eta_c, band):
        return 1
    return 2 if eta < eta_c else 0


def eta_critical_numeric(k: int, theta: float) -> float:
    """eta at which min_{z > 0} f_k(z) = 0, located without the closed form.

    The minimum is found by bounded Brent minimization and the threshold by
    Brent root-finding in eta; every root is below theta**(-k/(k-1)).
    """
    from scipy.optimize import brentq, minimize_scalar

    if k < 2:
        raise ValueError("the double-root criterion needs k >= 2")
    z_cap = 2.0 * theta ** (-k / (k - 1))

    def min_f(eta: float) -> float:
        res = minimize_scalar(
            lambda z: constant_equation(z, k, theta, eta),
            bounds=(0.0, z_cap),
            method="bounded",
            options={"xatol": 1e-13 * z_cap, "maxiter": 1000},
        )
        return min(res.fun, constant_equation(0.0, k, theta, eta))

    hi = z_cap ** (1.0 / k)
    while min_f(hi) <= 0:
        hi *= 2.0
    # at eta = 0 the minimum is negative: z* = theta**(-k/(k-1)) is a simple root
    return brentq(min_f, 0.0, hi, xtol=1e-300, rtol=4 * 2.0**-52, maxiter=500)


# ----------------------------------------------------------------------------
# J = +inf families


def alpha_sequence(alpha_1: float | Fraction, k: int, n_max: int) -> list[Fraction]:
    """Exponents alpha_n = (alpha_1 - k (k**n - 1)/(k - 1)) / k**n for n = 1..n_max.

    The formula is used at every n >= 1, so ``alpha_1`` is the family
    parameter sitting one step above depth 1 of the recursion
    alpha_{n+1} = alpha_n / k - 1.  Arithmetic is exact.
    """
    if k < 2:
        raise ValueError("the level family needs k >= 2")
    a = Fraction(alpha_1)
    return [(a - Fraction(k * (k**n - 1), k - 1)) / k**n for n in range(1, n_max + 1)]


def j_infinite_fixed_point(k: int, theta: float) -> float:
    """Constant J = +inf solution theta**(-k/(k-1))."""
    return theta ** (-k / (k - 1))


def j_infinite_level_family(
    p: ModelParams, alpha_1: float | Fraction, n_max: int, tol: float = DEFAULT_TOL
) -> LevelLaw:
    if not p.hard_constraint:
        raise ValueError("the level family solves the J = +inf equation")
    k, theta = p.k, p.theta
    if k < 2:
        raise ValueError("use j_infinite_1d_family for k = 1")
    if theta == 1.0:
        raise ValueError("theta = 1: log base theta degenerates and all solutions coincide")
    alphas = alpha_sequence(alpha_1, k, n_max)
    levels = tuple(theta ** float(a) for a in alphas)
    law = LevelLaw(levels, tail=j_infinite_fixed_point(k, theta), exponents=tuple(alphas))
    _check_levels(law, p, n_max - 1, tol)
    return law


def j_infinite_1d_family(theta: float, z_1: float, n: int) -> LevelLaw:
    """z_m = theta**(-(m-1)) z_1 for m = 1..n, the general k = 1 solution."""
    if not z_1 > 0 or not theta > 0:
        raise ValueError("need theta > 0 and z_1 > 0")
    return LevelLaw(tuple(theta ** (-(m - 1)) * z_1 for m in range(1, n + 1)))


def _check_levels(law: LevelLaw, p: ModelParams, depth: int, tol: float) -> None:
    for d in range(1, depth + 1):
        z = law.level_value(d)
        r = residual(law, VertexId((0,) * d), p)
        if r > tol * max(1.0, z):
            raise NumericFailure(f"level law residual {r} at depth {d}")


def law_from_leaves(p: ModelParams, n: int, leaf_values: Sequence[float]) -> ExplicitLaw:
    """Non-uniform law on V_n built upward from arbitrary positive values on W_n.

    Each interior value is defined by the functional equation, so the law is
    compatible at depths 1..n-1 for any choice of leaves.
    """
    k = p.k
    leaves = list(tree.generation(k, n))
    if len(leaf_values) != len(leaves):
        raise ValueError(f"need {len(leaves)} leaf values, got {len(leaf_values)}")
    values: dict[VertexId, float] = dict(zip(leaves, map(float, leaf_values)))
    theta, eta = p.theta, p.eta
    for d in range(n - 1, 0, -1):
        for x in tree.generation(k, d):
            prod = 1.0
            for y in tree.children(x, k):
                prod *= theta * values[y] + eta
            values[x] = prod
    return ExplicitLaw(values, n)
