"""Free energies, critical temperatures and phase scans."""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from zipper import boundary_law as bl
from zipper import gibbs, tree
from zipper.boundary_law import BoundaryLaw, LevelLaw
from zipper.model import ModelParams

CSV_COLUMNS = (
    "T", "beta", "theta", "eta", "eta_c", "n_tigm",
    "z_minus", "z_plus", "f_minus", "f_plus", "t_cr_flag",
)


def b_of(z: float, theta: float, eta: float) -> float:
    """Per-vertex free-energy density (1/2) ln((theta z + eta) / (theta**2 z))."""
    if not z > 0 or not theta > 0 or not eta >= 0:
        raise ValueError("need z > 0, theta > 0, eta >= 0")
    return 0.5 * (math.log(theta * z + eta) - 2.0 * math.log(theta) - math.log(z))


def free_energy_constant(p: ModelParams, z: float) -> float:
    """Free energy of the state built from the constant law z (all summands equal b(z))."""
    return b_of(z, p.theta, p.eta)


def free_energy_k2(theta: float, z: float) -> float:
    """-(1/4) ln(theta**4 z), valid for roots of z = (theta z + eta)**2."""
    return -0.25 * math.log(theta**4 * z)


def finite_volume_free_energy(p: ModelParams, law: BoundaryLaw | None, n: int) -> float:
    """(1/|V_n|) ln Z_n with fields induced by ``law`` on W_n (zero fields for None)."""
    h = gibbs.zero_fields(p.k, n) if law is None else gibbs.fields_from_law(law, p.k, n)
    return gibbs.log_partition_function(p, h) / tree.volume(p.k, n)


def seed_correction(p: ModelParams, law: BoundaryLaw) -> float:
    """ln Z_1 - (1 + k) b(z_1) for a level-uniform law.

    For a compatible law, ln Z_n = ln Z_1 + sum_{2 <= |x| <= n} b(x), so the
    finite-volume free energy differs from b by this quantity over |V_n| when
    the law is constant.
    """
    log_z1 = gibbs.log_partition_function(p, gibbs.fields_from_law(law, p.k, 1))
    return log_z1 - (1 + p.k) * b_of(law.level_value(1), p.theta, p.eta)


def log_z_from_b(p: ModelParams, law: BoundaryLaw, n: int) -> float:
    """ln Z_1 + sum over 2 <= |x| <= n of b(x), the product form of Z_n."""
    theta, eta = p.theta, p.eta
    total = gibbs.log_partition_function(p, gibbs.fields_from_law(law, p.k, 1))
    for d in range(2, n + 1):
        if law.level_uniform:
            total += p.k**d * b_of(law.level_value(d), theta, eta)
        else:
            total += sum(b_of(law.value(x), theta, eta) for x in tree.generation(p.k, d))
    return total


@dataclass(frozen=True)
class LevelFreeEnergy:
    partial: float
    limit: float


def free_energy_level(p: ModelParams, law: LevelLaw, n: int) -> LevelFreeEnergy:
    """Volume average of b over V_n for a depth-dependent J = +inf law.

    The root carries no law value; it is assigned b at depth 1, which is
    immaterial when eta = 0 because b does not depend on z there.
    """
    if not p.hard_constraint:
        raise ValueError("the level families solve the J = +inf equation")
    theta, eta = p.theta, p.eta
    total = b_of(law.level_value(1), theta, eta)
    for m in range(1, n + 1):
        total += p.k**m * b_of(law.level_value(m), theta, eta)
    return LevelFreeEnergy(total / tree.volume(p.k, n), -0.5 * math.log(theta))


# ----------------------------------------------------------------------------
# Kittel's one-dimensional zipper


def kittel_1d_partition(q: int, beta: float, epsilon: float, N: int) -> float:
    """(1 - a**N) / (1 - a) with a = q exp(-beta epsilon); N at a = 1."""
    if N < 1:
        raise ValueError("N must be >= 1")
    a = q * math.exp(-beta * epsilon)
    if a == 1.0:
        return float(N)
    return -math.expm1(N * math.log(a)) / (1.0 - a)


def kittel_1d_free_energy(q: int, beta: float, epsilon: float, N: int) -> float:
    return math.log(kittel_1d_partition(q, beta, epsilon, N)) / N


def kittel_1d_limit(q: int, beta: float, epsilon: float) -> float:
    """lim (1/N) ln Z_N = max(0, ln a)."""
    return max(0.0, math.log(q) - beta * epsilon)


# ----------------------------------------------------------------------------
# critical temperature


@dataclass(frozen=True)
class CriticalTemperature:
    value: float | None
    in_A: bool
    reason: str | None = None

    def to_dict(self) -> dict:
        return {"t_cr": self.value, "in_A": self.in_A, "reason": self.reason}


def critical_temperature(k: int, q: int, epsilon: float, J: float) -> CriticalTemperature:
    """(epsilon - (k-1) J) / ln(q (k-1)**(k-1) / k**k); epsilon / ln q at k = 1.

    ``value`` is None when no positive critical temperature exists.
    """
    if k < 1 or q < 1:
        raise ValueError("need k >= 1 and q >= 1")
    if math.isinf(J) and k >= 2:
        return CriticalTemperature(None, False, "infinite_coupling")
    # 0**0 = 1 at k = 1
    log_ratio = math.log(q) + (k - 1) * math.log(k - 1 if k > 1 else 1) - k * math.log(k)
    numerator = epsilon - (k - 1) * (J if k > 1 else 0.0)
    if log_ratio == 0.0:
        return CriticalTemperature(None, False, "zero_denominator")
    value = numerator / log_ratio
    if not value > 0:
        return CriticalTemperature(None, False, "non_positive")
    return CriticalTemperature(value, True)


def nonuniqueness_side(k: int, q: int, epsilon: float, J: float) -> str | None:
    """Side of T_cr on which two constant roots exist: "above" or "below".

    Two roots exist iff beta (epsilon - (k-1) J) < ln(q (k-1)**(k-1) / k**k);
    with a positive T_cr both sides of that inequality share a sign, and the
    sign of the logarithm alone decides the side.
    """
    if k < 2:
        raise ValueError("the two-root regime needs k >= 2")
    tc = critical_temperature(k, q, epsilon, J)
    if tc.value is None:
        return None
    log_ratio = math.log(q) + (k - 1) * math.log(k - 1) - k * math.log(k)
    return "above" if log_ratio > 0 else "below"


def critical_temperature_numeric(
    k: int, q: int, epsilon: float, J: float, t_lo: float, t_hi: float, xtol: float = 1e-13
) -> float:
    """T in [t_lo, t_hi] where eta(T) equals the numerically located double-root threshold."""
    def gap(T: float) -> float:
        p = ModelParams.from_temperature(k, q, epsilon, J, T)
        return math.log(p.eta) - math.log(bl.eta_critical_numeric(k, p.theta))

    g_lo, g_hi = gap(t_lo), gap(t_hi)
    if g_lo == 0:
        return t_lo
    if g_hi == 0:
        return t_hi
    if (g_lo > 0) == (g_hi > 0):
        raise ValueError("no criticality crossing in the temperature bracket")
    lo, hi = t_lo, t_hi
    while hi - lo > xtol * max(1.0, abs(lo)):
        mid = 0.5 * (lo + hi)
        g_mid = gap(mid)
        if g_mid == 0:
            return mid
        if (g_mid > 0) == (g_lo > 0):
            lo, g_lo = mid, g_mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def n_tigm(k: int, theta: float, eta: float, band: float = bl.CRITICAL_BAND) -> int:
    """Number of translation-invariant Gibbs measures (constant boundary laws)."""
    return bl.count_solutions(k, theta, eta, band)


# ----------------------------------------------------------------------------
# phase scans


@dataclass(frozen=True)
class PhasePoint:
    params: ModelParams
    theta: float
    eta: float
    eta_c: float | None
    n_tigm: int
    roots: tuple[float, ...]
    free_energies: tuple[float, ...]
    regime: str
    t_cr: float | None

    @property
    def z_minus(self) -> float | None:
        return self.roots[0] if self.roots else None

    @property
    def z_plus(self) -> float | None:
        return self.roots[-1] if self.roots else None

    @property
    def f_minus(self) -> float | None:
        return self.free_energies[0] if self.free_energies else None

    @property
    def f_plus(self) -> float | None:
        return self.free_energies[-1] if self.free_energies else None

    @property
    def branch_label(self) -> str:
        if len(self.roots) == 2:
            return "pair"
        if self.regime == "critical":
            return "double"
        return "single" if self.roots else "none"

    def row(self) -> dict:
        return {
            "T": self.params.temperature,
            "beta": self.params.beta,
            "theta": self.theta,
            "eta": self.eta,
            "eta_c": self.eta_c,
            "n_tigm": len(self.roots),
            "z_minus": self.z_minus,
            "z_plus": self.z_plus,
            "f_minus": self.f_minus,
            "f_plus": self.f_plus,
            "t_cr_flag": int(self.regime == "critical"),
        }


def phase_point(p: ModelParams) -> PhasePoint:
    sols = bl.solve_constant(p)
    f_values = tuple(free_energy_constant(p, z) for z in sols.roots)
    tc = critical_temperature(p.k, p.q, p.epsilon, p.J)
    return PhasePoint(
        params=p,
        theta=p.theta,
        eta=p.eta,
        eta_c=sols.eta_c,
        n_tigm=sols.count,
        roots=sols.roots,
        free_energies=f_values,
        regime=sols.regime,
        t_cr=tc.value,
    )


def worker_count() -> int:
    try:
        return max(1, int(os.environ.get("ZIPPER_THREADS", "1")))
    except ValueError:
        return 1


def phase_scan(
    k: int, q: int, epsilon: float, J: float, temperatures: Sequence[float], workers: int | None = None
) -> list[PhasePoint]:
    """PhasePoint for every temperature, in input order."""
    if len(temperatures) == 0:
        raise ValueError("empty temperature range")
    params = [ModelParams.from_temperature(k, q, epsilon, J, T) for T in temperatures]
    workers = worker_count() if workers is None else workers
    if workers <= 1:
        return [phase_point(p) for p in params]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(phase_point, params))


def temperature_grid(t_min: float, t_max: float, points: int) -> list[float]:
    if points < 1 or not t_max >= t_min or not t_min > 0:
        raise ValueError("need 0 < t_min <= t_max and at least one point")
    if points == 1:
        return [t_min]
    step = (t_max - t_min) / (points - 1)
    return [t_min + i * step for i in range(points - 1)] + [t_max]


@dataclass
class FreeEnergyCurve:
    temperatures: list[float]
    f_minus: list[float | None]
    f_plus: list[float | None]
    labels: list[str] = field(default_factory=list)

    @classmethod
    def from_scan(cls, points: Iterable[PhasePoint]) -> "FreeEnergyCurve":
        points = list(points)
        return cls(
            [pt.params.temperature for pt in points],
            [pt.f_minus for pt in points],
            [pt.f_plus for pt in points],
            [pt.branch_label for pt in points],
        )

    def branch_order(self) -> str | None:
        """"minus_above", "plus_above" or "mixed" over rows where both branches exist."""
        signs = {
            (fm > fp) - (fm < fp)
            for fm, fp in zip(self.f_minus, self.f_plus)
            if fm is not None and fp is not None and fm != fp
        }
        if not signs:
            return None
        if signs == {1}:
            return "minus_above"
        if signs == {-1}:
            return "plus_above"
        return "mixed"


def hard_constraint_free_energies(q: int, epsilon: float, k: int, temperatures: Sequence[float], n: int) -> list[dict]:
    """Side-by-side free energies at J = +inf.

    ``f_boundary_law`` is -(1/2) ln theta from the b-formula; ``f_direct`` is
    (1/|V_n|) ln Z_n with zero boundary fields, whose large-n value is
    max(0, -ln theta) for this tree.
    """
    out = []
    for T in temperatures:
        p = ModelParams.from_temperature(k, q, epsilon, math.inf, T)
        out.append({
            "T": T,
            "theta": p.theta,
            "f_boundary_law": -0.5 * math.log(p.theta),
            "f_direct": finite_volume_free_energy(p, None, n),
            "f_direct_limit": max(0.0, -math.log(p.theta)),
        })
    return out
