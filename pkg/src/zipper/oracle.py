"""Brute-force ground truth and the verification battery.

Nothing here reuses the subtree recursion for the quantity it checks: the
partition function is summed configuration by configuration, the 1D chain is
enumerated from its own Hamiltonian, and root counts come from a sign-change
scan rather than the unimodality argument.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from itertools import product
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import logsumexp

from zipper import boundary_law as bl
from zipper import gibbs, tree
from zipper.boundary_law import BoundaryLaw, ConstantLaw
from zipper.gibbs import BoundaryFields
from zipper.model import (
    Configuration,
    EnumerationTooLarge,
    ModelParams,
    count_admissible,
    hamiltonian,
    is_admissible,
    parse_coupling,
)
from zipper.thermo import kittel_1d_partition

EXHAUSTIVE_GUARD = 10**6
RESIDUAL_TOL = 1e-12
COMPAT_TOL = 1e-10
RECURSION_TOL = 1e-10
DP_TOL = 1e-12


def admissible_array(k: int, q: int, n: int, guard: int = EXHAUSTIVE_GUARD) -> np.ndarray:
    """Every admissible configuration as a row, columns in shortlex vertex order.

    Rows are grown one vertex at a time: a vertex under a closed parent takes
    any of the q + 1 labels, one under an open parent any of the q open labels.
    """
    total = count_admissible(k, q, n)
    if total > guard:
        raise EnumerationTooLarge(f"|Omega_{n}| = {total} exceeds the enumeration guard {guard}")
    verts = list(tree.vertices(k, n))
    parents = [tree.index(tree.parent(v), k) if not v.is_root else -1 for v in verts]
    rows = np.zeros((1, len(verts)), dtype=np.int16)
    for i in range(1, len(verts)):
        parent_closed = rows[:, parents[i]] == 0
        reps = np.where(parent_closed, q + 1, q)
        expanded = np.repeat(rows, reps, axis=0)
        # label sequence per source row: 0..q under a closed parent, 1..q otherwise
        starts = np.repeat(np.where(parent_closed, 0, 1), reps)
        offsets = np.arange(len(expanded)) - np.repeat(np.cumsum(reps) - reps, reps)
        expanded[:, i] = starts + offsets
        rows = expanded
    assert len(rows) == total
    return rows


def log_weights_exhaustive(p: ModelParams, h: BoundaryFields, guard: int = EXHAUSTIVE_GUARD) -> np.ndarray:
    """-beta H + boundary fields for every row of :func:`admissible_array`."""
    k, n = p.k, h.n
    rows = admissible_array(k, p.q, n, guard)
    verts = list(tree.vertices(k, n))
    is_open = rows != 0
    n_open = is_open[:, 1:].sum(axis=1)
    deep = [i for i, v in enumerate(verts) if v.depth >= 2]
    parent_idx = [tree.index(tree.parent(verts[i]), k) for i in deep]
    nucleations = (is_open[:, deep] & ~is_open[:, parent_idx]).sum(axis=1) if deep else np.zeros(len(rows), int)
    if p.hard_constraint:
        logw = np.where(nucleations > 0, -np.inf, -p.beta * p.epsilon * n_open)
    else:
        logw = -p.beta * (p.epsilon * n_open + p.J * nucleations)
    lo = tree.volume(k, n - 1)
    leaves = list(tree.generation(k, n))
    h0 = np.array([h.at(y)[0] for y in leaves])
    h1 = np.array([h.at(y)[1] for y in leaves])
    leaf_open = is_open[:, lo:]
    return logw + np.where(leaf_open, h1, h0).sum(axis=1)


def log_z_exhaustive(p: ModelParams, h: BoundaryFields, guard: int = EXHAUSTIVE_GUARD) -> float:
    """ln Z_n summed over every admissible configuration."""
    return float(logsumexp(log_weights_exhaustive(p, h, guard)))


def z_exhaustive(p: ModelParams, h: BoundaryFields, guard: int = EXHAUSTIVE_GUARD) -> float:
    return math.exp(log_z_exhaustive(p, h, guard))


# ----------------------------------------------------------------------------
# Kittel's chain


def chain_energy(s: Sequence[int], epsilon: float, J: float) -> float:
    """eps (1 - d(0, s_1)) + sum_{i=2}^{N-1} (eps + J d(0, s_{i-1})) (1 - d(0, s_i)).

    ``s[0]`` is link 1; the last entry is link N and is not summed.
    """
    N = len(s)
    energy = epsilon if s[0] != 0 else 0.0
    for i in range(2, N):
        if s[i - 1] == 0:
            continue
        if s[i - 2] == 0:
            if math.isinf(J):
                return math.inf
            energy += epsilon + J
        else:
            energy += epsilon
    return energy


def z_chain_exhaustive(q: int, beta: float, epsilon: float, J: float, N: int) -> float:
    """Z_N by enumerating s in {0..q}^N with s_N = 0."""
    total = 0.0
    for head in product(range(q + 1), repeat=N - 1):
        e = chain_energy(head + (0,), epsilon, J)
        if not math.isinf(e):
            total += math.exp(-beta * e)
    return total


def z_chain_transfer(q: int, beta: float, epsilon: float, J: float, N: int) -> float:
    """Z_N of the chain by a two-state transfer pass from link 1 to link N-1."""
    if N == 1:
        return 1.0
    open_w = q * math.exp(-beta * epsilon)
    jump = 0.0 if math.isinf(J) else math.exp(-beta * J)
    closed, opened = 1.0, open_w  # link 1
    for _ in range(2, N):
        closed, opened = closed + opened, open_w * (opened + jump * closed)
    return closed + opened


@dataclass
class AlignmentReport:
    """How Kittel's chain of N links sits inside the k = 1 tree."""

    q: int
    beta_epsilon: float
    N: int
    a: float
    convention: str
    z_closed_form: float
    z_chain: float
    z_tree_pinned: float
    z_tree_literal: float
    chain_matches_closed_form: bool
    pinned_matches: bool
    literal_matches: bool
    energy_map_checked: bool
    notes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def chain_to_tree(s: Sequence[int]) -> tuple[int, ...]:
    """Tree spins (root first, depth j = link N - j) for a chain configuration."""
    return tuple(reversed(tuple(s)))


def align_1d(q: int, beta: float, epsilon: float, N: int, map_limit: int = 20000) -> AlignmentReport:
    """Pin the chain/tree correspondence and check Kittel's closed form against it.

    The always-closed link N is the root and link N - j is the depth-j vertex,
    so the tree volume is V_{N-1}.  Under this map the chain's hard constraint
    (an open link needs an open link before it) is exactly zipper
    admissibility, and the chain energy equals the tree energy at J = 0.  The
    tree's own coupling then acts on a bond the chain leaves free; at
    J = +inf it forces each level-1 branch to be all open or all closed,
    giving Z = 1 + a**(N-1) instead of the closed form.
    """
    if N < 2:
        raise ValueError("alignment needs N >= 2")
    a = q * math.exp(-beta * epsilon)
    closed_form = kittel_1d_partition(q, beta, epsilon, N)
    if (q + 1) ** (N - 1) <= map_limit:
        z_chain = z_chain_exhaustive(q, beta, epsilon, math.inf, N)
    else:
        z_chain = z_chain_transfer(q, beta, epsilon, math.inf, N)

    pinned = ModelParams(1, q, epsilon, 0.0, beta)
    literal = ModelParams(1, q, epsilon, math.inf, beta)
    h = gibbs.zero_fields(1, N - 1)
    z_pinned = gibbs.partition_function_dp(pinned, h)
    z_literal = gibbs.partition_function_dp(literal, h)

    energy_checked = False
    if (q + 1) ** (N - 1) <= map_limit:
        # finite-energy chain states <-> admissible tree states, equal energies at tree J = 0
        seen = set()
        for head in product(range(q + 1), repeat=N - 1):
            s = head + (0,)
            e_chain = chain_energy(s, epsilon, math.inf)
            c = Configuration(1, N - 1, chain_to_tree(s))
            admissible = is_admissible(c, q)
            if math.isinf(e_chain):
                if admissible:
                    raise AssertionError(f"forbidden chain state {s} maps to an admissible tree state")
                continue
            if not admissible:
                raise AssertionError(f"allowed chain state {s} maps to a non-admissible tree state")
            if not math.isclose(e_chain, hamiltonian(c, pinned), rel_tol=1e-12, abs_tol=1e-12):
                raise AssertionError(f"energy mismatch for chain state {s}")
            seen.add(c.spins)
        if len(seen) != count_admissible(1, q, N - 1):
            raise AssertionError("chain states do not cover the admissible tree states")
        energy_checked = True

    def close(x: float) -> bool:
        return abs(x - closed_form) <= 1e-10 * max(1.0, abs(closed_form))

    notes = []
    if not close(z_literal):
        notes.append(
            f"tree J=+inf gives Z={z_literal!r} (= 1 + a^(N-1)), not the closed form {closed_form!r}"
        )
    return AlignmentReport(
        q=q,
        beta_epsilon=beta * epsilon,
        N=N,
        a=a,
        convention="root = link N; depth-j vertex = link N-j; volume V_{N-1}; chain J=+inf <-> tree admissibility with tree J=0",
        z_closed_form=closed_form,
        z_chain=z_chain,
        z_tree_pinned=z_pinned,
        z_tree_literal=z_literal,
        chain_matches_closed_form=close(z_chain),
        pinned_matches=close(z_pinned),
        literal_matches=close(z_literal),
        energy_map_checked=energy_checked,
        notes=notes,
    )


# ----------------------------------------------------------------------------
# constant-root oracles


def sign_change_count(
    k: int, theta: float, eta: float, lo: float = 1e-8, points: int = 200_000, touch: float = 1e-10
) -> int:
    """Positive roots of (theta z + eta)**k - z counted by sign changes on a geometric grid.

    Every positive root satisfies z >= (theta z)**k, i.e. z <= theta**(-k/(k-1)).
    A minimum that only touches zero shows no sign change, so the grid minimum
    is refined and counted as a single root when it lies within ``touch``
    of zero.  At the minimizer df/deta = 1/theta, so this tolerance in f
    corresponds to an eta-band of about touch * max(1, eta).
    """
    hi = 2.0 * theta ** (-k / (k - 1)) + 1.0
    z = np.geomspace(lo, hi, points)

    def f(x):
        return (theta * x + eta) ** k - x

    values = f(z)
    s = np.sign(values)
    s = s[s != 0]
    changes = int(np.count_nonzero(s[1:] != s[:-1]))
    i = int(np.argmin(values))
    a, b = z[max(i - 1, 0)], z[min(i + 1, points - 1)]
    res = minimize_scalar(f, bounds=(a, b), method="bounded", options={"xatol": 1e-15 * b})
    f_min = min(float(res.fun), float(values[i]))
    if abs(f_min) <= touch * max(1.0, eta) / theta and changes in (0, 2):
        return 1
    return changes


@dataclass
class EtaCriticalVerdict:
    k: int
    theta: float
    numeric: float
    general_formula: float
    k2_formula: float | None
    plotted_value: float | None
    general_matches: bool
    k2_matches: bool | None
    plotted_matches: bool | None

    def to_dict(self) -> dict:
        return asdict(self)


PLOTTED_ETA_C = {(4, 2.0): 3.0 / 8.0}


def eta_critical_verdict(k: int, theta: float, tol: float = 1e-8) -> EtaCriticalVerdict:
    """Compare each printed eta_c expression with the numeric double-root threshold."""
    numeric = bl.eta_critical_numeric(k, theta)
    general = bl.eta_critical(k, theta)
    k2 = 1.0 / (4.0 * theta) if k == 2 else None
    plotted = PLOTTED_ETA_C.get((k, float(theta)))

    def rel_ok(x: float | None) -> bool | None:
        return None if x is None else abs(x - numeric) <= tol * max(1.0, numeric)

    return EtaCriticalVerdict(
        k, theta, numeric, general, k2, plotted, bool(rel_ok(general)), rel_ok(k2), rel_ok(plotted)
    )


# ----------------------------------------------------------------------------
# verification battery


@dataclass(frozen=True)
class VerifyCase:
    case_id: str
    params: ModelParams
    n: int
    law: BoundaryLaw
    law_label: str


@dataclass
class OracleReport:
    case_id: str
    k: int
    q: int
    n: int
    law: str
    omega_count: int
    z_dp: float
    z_exhaustive: float | None
    dp_rel_error: float | None
    max_probability_deviation: float | None
    max_residual: float
    compatibility_error: float
    compatibility_tv: float
    Z_recursion_error: float
    sampling_z_score: float
    wall_time: float
    passed: bool
    failures: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def build_law(p: ModelParams, spec: Mapping, n: int) -> tuple[BoundaryLaw, str]:
    """Law described by a battery entry: constant root, J = +inf family, or explicit values."""
    kind = spec.get("kind", "constant")
    horizon = n + 1
    if kind == "constant":
        if "z" in spec:
            return ConstantLaw(float(spec["z"])), f"constant z={spec['z']}"
        sols = bl.solve_constant(p)
        which = spec.get("root", "minus")
        if not sols.roots:
            raise ValueError(f"no constant root at theta={p.theta}, eta={p.eta}")
        z = sols.roots[0] if which == "minus" else sols.roots[-1]
        return ConstantLaw(z), f"constant {which} z={z:.6g}"
    if kind == "level":
        alpha_1 = spec["alpha_1"]
        law = bl.j_infinite_level_family(p, alpha_1, horizon)
        return law, f"level alpha_1={alpha_1}"
    if kind == "geometric":
        z_1 = float(spec["z_1"])
        return bl.j_infinite_1d_family(p.theta, z_1, horizon), f"geometric z_1={z_1}"
    if kind == "explicit":
        return bl.law_from_dict(spec["law"]), "explicit"
    raise ValueError(f"unknown law kind {kind!r}")


def case_from_dict(entry: Mapping) -> list[VerifyCase]:
    k, q = int(entry["k"]), int(entry["q"])
    if "theta" in entry:
        p = ModelParams.from_theta_eta(k, q, float(entry["theta"]), float(entry["eta"]), float(entry.get("beta", 1.0)))
    else:
        p = ModelParams(k, q, float(entry["epsilon"]), parse_coupling(entry["J"]), float(entry["beta"]))
    ns = entry.get("n", [2, 3, 4])
    ns = [ns] if isinstance(ns, int) else list(ns)
    out = []
    for n in ns:
        law, label = build_law(p, entry.get("law", {}), n)
        out.append(VerifyCase(f"k{k}-q{q}-n{n}-{label}", p, n, law, label))
    return out


def default_battery() -> list[VerifyCase]:
    """k in {1,2,3}, q in {1,2,8}, n in {2,3,4}; both finite-J roots and the J = +inf families."""
    entries = []
    for k in (1, 2, 3):
        for q in (1, 2, 8):
            if k == 1:
                entries.append({"k": k, "q": q, "theta": 0.5, "eta": 0.5, "law": {"kind": "constant"}})
                for theta in (0.5, 2.0):
                    entries.append({"k": k, "q": q, "theta": theta, "eta": 0.0, "law": {"kind": "geometric", "z_1": 1.0}})
            else:
                eta = 0.5 * bl.eta_critical(k, 0.5)
                for root in ("minus", "plus"):
                    entries.append({"k": k, "q": q, "theta": 0.5, "eta": eta, "law": {"kind": "constant", "root": root}})
                for theta in (0.5, 2.0):
                    for alpha_1 in (-k / (k - 1), 1.0):
                        entries.append({"k": k, "q": q, "theta": theta, "eta": 0.0, "law": {"kind": "level", "alpha_1": alpha_1}})
    cases = []
    for entry in entries:
        cases.extend(case_from_dict(entry))
    return cases


def perturb_case(case: VerifyCase, delta: float) -> VerifyCase:
    return VerifyCase(case.case_id + f"-perturbed{delta:g}", case.params, case.n, case.law.perturbed(delta), case.law_label)


def run_case(
    case: VerifyCase,
    exhaustive_guard: int = EXHAUSTIVE_GUARD,
    samples: int = 20_000,
    seed: int = 0,
) -> OracleReport:
    """Every check for one case; failures are recorded, never raised."""
    t0 = time.perf_counter()
    p, n, law = case.params, case.n, case.law
    failures: list[str] = []
    h = gibbs.fields_from_law(law, p.k, n)
    log_z_dp = gibbs.log_partition_function(p, h)
    omega = count_admissible(p.k, p.q, n)

    z_ex = rel = prob_dev = None
    if omega <= exhaustive_guard:
        lw = log_weights_exhaustive(p, h, exhaustive_guard)
        log_z_ex = float(logsumexp(lw))
        z_ex = math.exp(log_z_ex)
        rel = abs(math.expm1(log_z_dp - log_z_ex))
        prob_dev = float(np.max(np.abs(np.exp(lw - log_z_dp) - np.exp(lw - log_z_ex))))
        if rel > DP_TOL:
            failures.append(f"dp/exhaustive relative error {rel:.3e}")

    res = bl.max_residual(law, p, n - 1)
    if res > RESIDUAL_TOL:
        failures.append(f"residual {res:.3e}")
    compat = gibbs.compatibility_error(p, law, n)
    compat_tv = gibbs.compatibility_tv(p, law, n)
    if compat > COMPAT_TOL or compat_tv > COMPAT_TOL:
        failures.append(f"compatibility error {compat:.3e} (tv {compat_tv:.3e})")
    rec = gibbs.recursion_error(p, law, n)
    if rec > RECURSION_TOL:
        failures.append(f"Z recursion error {rec:.3e}")

    # empirical closed frequency of the first level-1 vertex against its exact marginal
    first = tree.VertexId((0,))
    exact = gibbs.closed_marginal(p, h, first)
    draws = gibbs.sample_array(p, law, n, samples, seed)
    freq = float(np.mean(draws[:, tree.index(first, p.k)] == 0))
    se = math.sqrt(max(exact * (1 - exact), 1e-300) / samples)
    z_score = abs(freq - exact) / se if se > 0 else 0.0
    if z_score > 4.0 and abs(freq - exact) > 1e-12:
        failures.append(f"sampling z-score {z_score:.2f}")

    return OracleReport(
        case_id=case.case_id,
        k=p.k,
        q=p.q,
        n=n,
        law=case.law_label,
        omega_count=omega,
        z_dp=math.exp(log_z_dp),
        z_exhaustive=z_ex,
        dp_rel_error=rel,
        max_probability_deviation=prob_dev,
        max_residual=res,
        compatibility_error=compat,
        compatibility_tv=compat_tv,
        Z_recursion_error=rec,
        sampling_z_score=z_score,
        wall_time=time.perf_counter() - t0,
        passed=not failures,
        failures=failures,
    )


def verify_all(cases: Iterable[VerifyCase], workers: int = 1, **kwargs) -> list[OracleReport]:
    cases = list(cases)
    if workers <= 1:
        return [run_case(c, **kwargs) for c in cases]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda c: run_case(c, **kwargs), cases))
