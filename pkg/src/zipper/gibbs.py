"""Finite-volume Gibbs distributions built from boundary laws.

Every weight is kept in the log domain.  The partition function is a
bottom-up pass over the tree: for each vertex we carry the log weight of its
subtree when the vertex is closed and when it is open (one fixed open label),
and the pair of :class:`SubtreeWeight` values seen by its parent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Mapping

import numpy as np

from zipper import tree
from zipper.boundary_law import BoundaryLaw
from zipper.model import Configuration, ModelParams, enumerate_admissible, hamiltonian, is_admissible
from zipper.tree import VertexId


@dataclass(frozen=True)
class BoundaryFields:
    """Fields h_{a,x} on W_n.  Open labels share one value h_{1,x}.

    ``uniform`` holds (h0, h1) for every x in W_n; otherwise ``per_vertex``
    maps each x to its own pair.
    """

    k: int
    n: int
    uniform: tuple[float, float] | None = None
    per_vertex: Mapping[VertexId, tuple[float, float]] | None = None

    def __post_init__(self) -> None:
        if (self.uniform is None) == (self.per_vertex is None):
            raise ValueError("give exactly one of uniform / per_vertex fields")

    def at(self, x: VertexId) -> tuple[float, float]:
        if x.depth != self.n:
            raise ValueError(f"fields are materialized on W_{self.n} only, not at depth {x.depth}")
        if self.uniform is not None:
            return self.uniform
        return self.per_vertex[x]


def zero_fields(k: int, n: int) -> BoundaryFields:
    return BoundaryFields(k, n, uniform=(0.0, 0.0))


def fields_from_law(law: BoundaryLaw, k: int, n: int) -> BoundaryFields:
    """h_0 = ln(z)/2 and h_i = -ln(z)/2, so exp(h_0 - h_i) = z and h_0 + h_i = 0."""
    if n < 1:
        raise ValueError("fields live on W_n with n >= 1")
    if law.level_uniform:
        half = 0.5 * math.log(law.level_value(n))
        return BoundaryFields(k, n, uniform=(half, -half))
    pairs = {}
    for x in tree.generation(k, n):
        half = 0.5 * math.log(law.value(x))
        pairs[x] = (half, -half)
    return BoundaryFields(k, n, per_vertex=pairs)


# ----------------------------------------------------------------------------
# subtree dynamic programming


@dataclass(frozen=True)
class SubtreeWeight:
    """Log weights of a subtree as seen by its parent.

    ``log_closed`` / ``log_open`` are for the parent being closed / open and
    include the vertex's own state sum; ``inner_closed`` / ``inner_open`` are
    the subtree weights with the vertex itself fixed closed / open.
    """

    log_closed: float
    log_open: float
    inner_closed: float
    inner_open: float


def _combine(p: ModelParams, depth: int, inner_closed: float, inner_open: float) -> SubtreeWeight:
    log_q = math.log(p.q)
    open_after_closed = log_q + p.log_open_factor(depth, parent_closed=True) + inner_open
    open_after_open = log_q + p.log_open_factor(depth, parent_closed=False) + inner_open
    return SubtreeWeight(
        log_closed=float(np.logaddexp(inner_closed, open_after_closed)),
        log_open=open_after_open,
        inner_closed=inner_closed,
        inner_open=inner_open,
    )


def subtree_table(p: ModelParams, h: BoundaryFields) -> Callable[[VertexId], SubtreeWeight]:
    """Lookup ``v -> SubtreeWeight`` for every non-root vertex of V_n."""
    k, n = p.k, h.n
    if h.k != k:
        raise ValueError("fields and parameters disagree on k")
    if h.uniform is not None:
        by_depth: dict[int, SubtreeWeight] = {}
        h0, h1 = h.uniform
        by_depth[n] = _combine(p, n, h0, h1)
        for d in range(n - 1, 0, -1):
            below = by_depth[d + 1]
            by_depth[d] = _combine(p, d, k * below.log_closed, k * below.log_open)
        return lambda v: by_depth[v.depth]

    table: dict[VertexId, SubtreeWeight] = {}
    for x in tree.generation(k, n):
        h0, h1 = h.at(x)
        table[x] = _combine(p, n, h0, h1)
    for d in range(n - 1, 0, -1):
        for x in tree.generation(k, d):
            kids = [table[y] for y in tree.children(x, k)]
            table[x] = _combine(p, d, sum(w.log_closed for w in kids), sum(w.log_open for w in kids))
    return table.__getitem__


def log_partition_function(p: ModelParams, h: BoundaryFields) -> float:
    if h.n < 1:
        raise ValueError("no configuration space at n = 0")
    weights = subtree_table(p, h)
    return sum(weights(y).log_closed for y in tree.children(tree.ROOT, p.k))


def partition_function_dp(p: ModelParams, h: BoundaryFields) -> float:
    """Z_n summed by the subtree recursion (may overflow; prefer the log form)."""
    return math.exp(log_partition_function(p, h))


def log_weight(c: Configuration, p: ModelParams, h: BoundaryFields) -> float:
    """-beta H_n(c) + sum_{y in W_n} h_{c(y), y}."""
    if c.n != h.n:
        raise ValueError("configuration depth and field depth differ")
    energy = hamiltonian(c, p)
    if math.isinf(energy):
        return -math.inf
    total = -p.beta * energy if energy else 0.0
    for y in tree.generation(p.k, c.n):
        h0, h1 = h.at(y)
        total += h0 if c[y] == 0 else h1
    return total


def mu_n(p: ModelParams, h: BoundaryFields, c: Configuration, log_z: float | None = None) -> float:
    """Probability of ``c`` under the finite-dimensional distribution on V_n."""
    if not is_admissible(c, p.q):
        raise ValueError("mu_n is supported on zipper-admissible configurations")
    if log_z is None:
        log_z = log_partition_function(p, h)
    return math.exp(log_weight(c, p, h) - log_z)


def closed_marginal(p: ModelParams, h: BoundaryFields, v: VertexId) -> float:
    """P(v closed) under mu_n for a depth-1 vertex ``v``."""
    if v.depth != 1:
        raise ValueError("only level-1 marginals are closed-form in the subtree table")
    w = subtree_table(p, h)(v)
    return math.exp(w.inner_closed - w.log_closed)


# ----------------------------------------------------------------------------
# compatibility


def _merge(a: dict, b: dict, add: Callable[[float, float], float]) -> dict:
    out: dict = {}
    for ka, va in a.items():
        for kb, vb in b.items():
            key = tuple(x + y for x, y in zip(ka, kb))
            out[key] = add(out[key], va + vb) if key in out else va + vb
    return out


def _logaddexp(a: float, b: float) -> float:
    return float(np.logaddexp(a, b))


def _keyed_discrepancy(p: ModelParams, law: BoundaryLaw, n: int, reduce: str) -> list[tuple[float, float]]:
    """Configurations of Omega_{n-1} grouped by closed counts per ratio class.

    Returns ``(log_mass, log_ratio)`` pairs: ``log_mass`` is the max (``reduce="max"``)
    or total (``reduce="sum"``) log weight of mu_{n-1} within the group,
    normalized by Z_{n-1}; ``log_ratio`` is ln of (marginal of mu_n) / mu_{n-1},
    which is constant on each group.
    """
    k = p.k
    h_prev = fields_from_law(law, k, n - 1)
    h_next = fields_from_law(law, k, n)
    log_z_prev = log_partition_function(p, h_prev)
    log_z_next = log_partition_function(p, h_next)
    below = subtree_table(p, h_next)
    add = max if reduce == "max" else _logaddexp
    label_mult = 0.0 if reduce == "max" else math.log(p.q)

    ratios: dict[VertexId, tuple[float, float]] = {}
    for x in tree.generation(k, n - 1):
        h0, h1 = h_prev.at(x)
        kids = [below(y) for y in tree.children(x, k)]
        ratios[x] = (
            sum(w.log_closed for w in kids) - h0,
            sum(w.log_open for w in kids) - h1,
        )
    classes = sorted(set(ratios.values()))
    class_of = {x: classes.index(r) for x, r in ratios.items()}
    sizes = [0] * len(classes)
    for c in class_of.values():
        sizes[c] += 1
    zero = (0,) * len(classes)
    leaf_depth = n - 1
    uniform = h_prev.uniform is not None
    memo: dict = {}

    def tables(v: VertexId) -> tuple[dict, dict]:
        # subtree weight of v keyed by closed counts, for v closed / v open (one label)
        key = v.depth if uniform else v
        if key in memo:
            return memo[key]
        if v.depth == leaf_depth:
            h0, h1 = h_prev.at(v)
            unit = list(zero)
            unit[class_of[v]] = 1
            result = ({tuple(unit): h0}, {zero: h1})
        else:
            closed = {zero: 0.0}
            opened = {zero: 0.0}
            for y in tree.children(v, k):
                y_closed, y_open = tables(y)
                via_closed = dict(y_closed)
                shift = label_mult + p.log_open_factor(y.depth, parent_closed=True)
                if shift > -math.inf:
                    for kk, val in y_open.items():
                        val = val + shift
                        via_closed[kk] = add(via_closed[kk], val) if kk in via_closed else val
                shift_open = label_mult + p.log_open_factor(y.depth, parent_closed=False)
                via_open = {kk: val + shift_open for kk, val in y_open.items()}
                closed = _merge(closed, via_closed, add)
                opened = _merge(opened, via_open, add)
            result = (closed, opened)
        memo[key] = result
        return result

    root_closed, _ = tables(tree.ROOT)
    base = log_z_prev - log_z_next
    groups = []
    for counts, log_w in root_closed.items():
        if log_w == -math.inf:
            continue
        log_ratio = base + sum(
            c * classes[i][0] + (sizes[i] - c) * classes[i][1] for i, c in enumerate(counts)
        )
        groups.append((log_w - log_z_prev, log_ratio))
    return groups


def compatibility_error(p: ModelParams, law: BoundaryLaw, n: int, method: str = "dp") -> float:
    """max over sigma in Omega_{n-1} of |sum_omega mu_n(sigma v omega) - mu_{n-1}(sigma)|.

    Only law values on W_{n-1} and W_n enter, so the check at level n tests
    the functional equation at depth n-1.  The ratio of the two sides depends
    on sigma only through how many W_{n-1} vertices of each ratio class are
    closed, so ``method="dp"`` maximizes mu_{n-1} within each such group by a
    max-plus pass and is exact without enumeration.  ``method="exhaustive"``
    sums over Omega_n directly.
    """
    if n < 2:
        raise ValueError("compatibility is checked between levels n-1 >= 1 and n")
    if method == "exhaustive":
        return _compatibility_exhaustive(p, law, n)[0]
    if method != "dp":
        raise ValueError(f"unknown method {method!r}")
    return max(
        (math.exp(log_mass) * abs(math.expm1(log_ratio)) for log_mass, log_ratio in _keyed_discrepancy(p, law, n, "max")),
        default=0.0,
    )


def compatibility_tv(p: ModelParams, law: BoundaryLaw, n: int, method: str = "dp") -> float:
    """Total-variation distance between mu_{n-1} and the W_n-marginal of mu_n."""
    if n < 2:
        raise ValueError("compatibility is checked between levels n-1 >= 1 and n")
    if method == "exhaustive":
        return _compatibility_exhaustive(p, law, n)[1]
    if method != "dp":
        raise ValueError(f"unknown method {method!r}")
    return 0.5 * sum(
        math.exp(log_mass) * abs(math.expm1(log_ratio)) for log_mass, log_ratio in _keyed_discrepancy(p, law, n, "sum")
    )


def _compatibility_exhaustive(p: ModelParams, law: BoundaryLaw, n: int) -> tuple[float, float]:
    k, q = p.k, p.q
    h_prev = fields_from_law(law, k, n - 1)
    h_next = fields_from_law(law, k, n)
    prefix = tree.volume(k, n - 1)
    log_z_next = log_partition_function(p, h_next)
    log_z_prev = log_partition_function(p, h_prev)
    marginal: dict[tuple[int, ...], float] = {}
    for c in enumerate_admissible(k, q, n):
        key = c.spins[:prefix]
        marginal[key] = marginal.get(key, 0.0) + math.exp(log_weight(c, p, h_next) - log_z_next)
    worst = 0.0
    l1 = 0.0
    for c in enumerate_admissible(k, q, n - 1):
        mu = math.exp(log_weight(c, p, h_prev) - log_z_prev)
        diff = abs(marginal.get(c.spins, 0.0) - mu)
        worst = max(worst, diff)
        l1 += diff
    return worst, 0.5 * l1


# ----------------------------------------------------------------------------
# the a(x) recursion


def log_a_of(p: ModelParams, law: BoundaryLaw, x: VertexId) -> float:
    """ln a(x) with a(x) = theta**(-k) prod_{y in S(x)} [ (theta z_y + eta) / z_y ]**(1/2)."""
    theta, eta = p.theta, p.eta
    total = -p.k * math.log(theta)
    for y in tree.children(x, p.k):
        z = law.value(y)
        total += 0.5 * (math.log(theta * z + eta) - math.log(z))
    return total


def a_of(p: ModelParams, law: BoundaryLaw, x: VertexId) -> float:
    return math.exp(log_a_of(p, law, x))


def log_A(p: ModelParams, law: BoundaryLaw, n: int) -> float:
    """ln A_n = sum over x in W_n of ln a(x)."""
    if law.level_uniform:
        return p.k**n * log_a_of(p, law, VertexId((0,) * n))
    return sum(log_a_of(p, law, x) for x in tree.generation(p.k, n))


def recursion_error(p: ModelParams, law: BoundaryLaw, n: int) -> float:
    """Relative error of Z_n = A_{n-1} Z_{n-1}, with Z_m built from the law's fields on W_m."""
    if n < 2:
        raise ValueError("the recursion starts at n = 2")
    log_zn = log_partition_function(p, fields_from_law(law, p.k, n))
    log_prev = log_partition_function(p, fields_from_law(law, p.k, n - 1))
    return abs(math.expm1(log_A(p, law, n - 1) + log_prev - log_zn))


# ----------------------------------------------------------------------------
# exact sampling


def sample_array(p: ModelParams, law: BoundaryLaw | None, n: int, size: int, seed: int) -> np.ndarray:
    """``size`` independent exact draws from mu_n as an int array of shape (size, |V_n|).

    Columns follow the shortlex vertex order.  Randomness comes from a Philox
    counter-based generator keyed by ``seed``; vertices are visited in
    shortlex order and each consumes one block of ``size`` uniforms followed
    by one block of ``size`` open-label integers.  ``law=None`` uses zero fields.
    """
    k, q = p.k, p.q
    h = zero_fields(k, n) if law is None else fields_from_law(law, k, n)
    weights = subtree_table(p, h)
    rng = np.random.Generator(np.random.Philox(key=seed))
    verts = list(tree.vertices(k, n))
    out = np.zeros((size, len(verts)), dtype=np.int16)
    for i, v in enumerate(verts):
        if v.is_root:
            continue
        w = weights(v)
        p_closed = math.exp(w.inner_closed - w.log_closed)
        parent_closed = out[:, tree.index(tree.parent(v), k)] == 0
        u = rng.random(size)
        labels = rng.integers(1, q + 1, size=size, dtype=np.int16)
        closed = parent_closed & (u < p_closed)
        out[:, i] = np.where(closed, 0, labels)
    return out


def sample(p: ModelParams, law: BoundaryLaw | None, n: int, seed: int) -> Configuration:
    row = sample_array(p, law, n, 1, seed)[0]
    return Configuration(p.k, n, tuple(int(s) for s in row))


def open_fraction_by_level(samples: np.ndarray, k: int, n: int) -> list[float]:
    """Mean fraction of open vertices at each depth 0..n."""
    out = []
    for d in range(n + 1):
        lo = tree.volume(k, d - 1) if d else 0
        hi = tree.volume(k, d)
        out.append(float(np.mean(samples[:, lo:hi] != 0)))
    return out
