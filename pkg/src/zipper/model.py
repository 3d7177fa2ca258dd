"""Model parameters, zipper-admissible configurations and the Hamiltonian."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, Mapping

from zipper import tree
from zipper.tree import VertexId

ENUMERATION_GUARD = 10**6


class EnumerationTooLarge(ValueError):
    """Raised when an exhaustive enumeration would exceed the guard."""


def parse_coupling(value: str | float) -> float:
    if isinstance(value, str):
        text = value.strip().lower()
        if text in ("inf", "+inf", "infinity", "+infinity", "∞"):
            return math.inf
        return float(text)
    return float(value)


@dataclass(frozen=True)
class ModelParams:
    """Parameters (k, q, epsilon, J, beta) of the zipper Hamiltonian.

    ``J`` may be ``math.inf`` (Kittel's hard constraint).  ``beta = 0`` is
    accepted for finite ``J`` only, so that the infinite-temperature counting
    identities can be evaluated directly.
    """

    k: int
    q: int
    epsilon: float
    J: float
    beta: float

    def __post_init__(self) -> None:
        if int(self.k) != self.k or self.k < 1:
            raise ValueError(f"k must be an integer >= 1, got {self.k}")
        if int(self.q) != self.q or self.q < 1:
            raise ValueError(f"q must be an integer >= 1, got {self.q}")
        if not self.beta >= 0 or math.isinf(self.beta):
            raise ValueError(f"beta must be finite and >= 0, got {self.beta}")
        if math.isnan(self.J) or self.J == -math.inf:
            raise ValueError("J must be real or +inf")
        if self.beta == 0 and math.isinf(self.J):
            raise ValueError("beta = 0 with J = +inf is undefined")
        if not math.isfinite(self.epsilon):
            raise ValueError("epsilon must be finite")

    @classmethod
    def from_temperature(cls, k: int, q: int, epsilon: float, J: float, T: float) -> "ModelParams":
        if not T > 0:
            raise ValueError(f"temperature must be > 0, got {T}")
        return cls(k, q, epsilon, J, 1.0 / T)

    @classmethod
    def from_theta_eta(cls, k: int, q: int, theta: float, eta: float, beta: float = 1.0) -> "ModelParams":
        """Choose epsilon and J so that the transfer weights are (theta, eta)."""
        if not theta > 0 or not eta >= 0 or not beta > 0:
            raise ValueError("need theta > 0, eta >= 0, beta > 0")
        epsilon = math.log(q * theta) / beta
        J = math.inf if eta == 0 else -math.log(eta) / beta
        return cls(k, q, epsilon, J, beta)

    @property
    def hard_constraint(self) -> bool:
        return math.isinf(self.J)

    @property
    def temperature(self) -> float:
        return math.inf if self.beta == 0 else 1.0 / self.beta

    @property
    def log_theta(self) -> float:
        return self.beta * self.epsilon - math.log(self.q)

    @property
    def theta(self) -> float:
        return math.exp(self.log_theta)

    @property
    def log_eta(self) -> float:
        return -math.inf if self.hard_constraint else -self.beta * self.J

    @property
    def eta(self) -> float:
        return math.exp(self.log_eta)

    def log_open_factor(self, depth: int, parent_closed: bool) -> float:
        """Log Boltzmann factor for opening a vertex at ``depth``.

        Level-1 vertices never pay the coupling term, matching the separate
        W_1 sum of the Hamiltonian.
        """
        if depth >= 2 and parent_closed:
            if self.hard_constraint:
                return -math.inf
            return -self.beta * (self.epsilon + self.J)
        return -self.beta * self.epsilon

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "q": self.q,
            "epsilon": self.epsilon,
            "J": "inf" if self.hard_constraint else self.J,
            "beta": self.beta,
            "theta": self.theta,
            "eta": self.eta,
        }


@dataclass(frozen=True)
class Configuration:
    """Spins on V_n stored in the shortlex vertex order of :mod:`zipper.tree`."""

    k: int
    n: int
    spins: tuple[int, ...]
    _len: int = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "_len", tree.volume(self.k, self.n))
        if len(self.spins) != self._len:
            raise ValueError(
                f"malformed configuration: {len(self.spins)} spins for |V_{self.n}| = {self._len}"
            )

    def __getitem__(self, v: VertexId) -> int:
        return self.spins[tree.index(v, self.k)]

    @classmethod
    def from_mapping(cls, k: int, n: int, values: Mapping[VertexId | str, int]) -> "Configuration":
        keyed = {(tree.VertexId.parse(key) if isinstance(key, str) else key): int(s) for key, s in values.items()}
        spins = []
        for v in tree.vertices(k, n):
            if v not in keyed:
                raise ValueError(f"malformed configuration: no spin for vertex {v}")
            spins.append(keyed[v])
        return cls(k, n, tuple(spins))

    @classmethod
    def closed(cls, k: int, n: int) -> "Configuration":
        return cls(k, n, (0,) * tree.volume(k, n))

    def to_dict(self) -> dict[str, int]:
        return {v.label(): s for v, s in zip(tree.vertices(self.k, self.n), self.spins)}

    def open_pattern(self) -> tuple[bool, ...]:
        return tuple(s != 0 for s in self.spins)


def _parent_indices(k: int, n: int) -> list[int]:
    return [-1] + [tree.index(tree.parent(v), k) for v in tree.vertices(k, n) if not v.is_root]


def is_admissible(c: Configuration, q: int | None = None) -> bool:
    """Root closed, and every closed vertex has an all-closed path to the root."""
    if q is not None and any(s < 0 or s > q for s in c.spins):
        return False
    if c.spins[0] != 0:
        return False
    parents = _parent_indices(c.k, c.n)
    for i in range(1, len(c.spins)):
        if c.spins[i] == 0 and c.spins[parents[i]] != 0:
            return False
    return True


def hamiltonian(c: Configuration, p: ModelParams) -> float:
    """Energy of an admissible configuration on V_n; ``inf`` when forbidden by J = +inf."""
    if c.k != p.k:
        raise ValueError("configuration and parameters disagree on k")
    if c.n < 1:
        raise ValueError("the Hamiltonian needs n >= 1")
    if not is_admissible(c, p.q):
        raise ValueError("hamiltonian is only defined on zipper-admissible configurations")
    parents = _parent_indices(c.k, c.n)
    depth_start = tree.volume(c.k, 1)
    energy = 0.0
    for i in range(1, len(c.spins)):
        if c.spins[i] == 0:
            continue
        if i < depth_start:
            energy += p.epsilon
        elif c.spins[parents[i]] == 0:
            if p.hard_constraint:
                return math.inf
            energy += p.epsilon + p.J
        else:
            energy += p.epsilon
    return energy


def count_admissible(k: int, q: int, n: int) -> int:
    """|Omega_n| from the closed-set recursion, without enumerating."""
    closed = 1
    for d in range(1, n + 1):
        closed = (closed + q ** tree.volume(k, d - 1)) ** k
    return closed


def enumerate_admissible(k: int, q: int, n: int, guard: int = ENUMERATION_GUARD) -> Iterator[Configuration]:
    """Every admissible configuration on V_n exactly once, in lexicographic order."""
    total = count_admissible(k, q, n)
    if total > guard:
        raise EnumerationTooLarge(f"|Omega_{n}| = {total} exceeds the enumeration guard {guard}")
    parents = _parent_indices(k, n)
    size = len(parents)
    spins = [0] * size
    closed_choices = tuple(range(q + 1))
    open_choices = tuple(range(1, q + 1))

    def fill(i: int) -> Iterator[Configuration]:
        if i == size:
            yield Configuration(k, n, tuple(spins))
            return
        choices = closed_choices if spins[parents[i]] == 0 else open_choices
        for s in choices:
            spins[i] = s
            yield from fill(i + 1)

    yield from fill(1)
