"""Addressing on the rooted semi-infinite Cayley tree.

A vertex is the path of child indices leading to it from the root, so the
root is the empty path and every vertex has exactly ``k`` children.  The
parent is the unique neighbour closer to the root; the remaining ``k``
neighbours are the children.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product
from typing import Iterator

ROOT_LABEL = "ε"


@dataclass(frozen=True, order=True)
class VertexId:
    path: tuple[int, ...] = ()

    @property
    def depth(self) -> int:
        return len(self.path)

    @property
    def is_root(self) -> bool:
        return not self.path

    def child(self, i: int) -> "VertexId":
        return VertexId(self.path + (i,))

    def label(self) -> str:
        return ".".join(str(i) for i in self.path) if self.path else ROOT_LABEL

    @classmethod
    def parse(cls, text: str) -> "VertexId":
        text = text.strip()
        if text in (ROOT_LABEL, ""):
            return cls(())
        return cls(tuple(int(part) for part in text.split(".")))

    def __str__(self) -> str:
        return self.label()


ROOT = VertexId(())


def check_vertex(v: VertexId, k: int) -> None:
    if k < 1:
        raise ValueError(f"tree order must be >= 1, got {k}")
    if any(i < 0 or i >= k for i in v.path):
        raise ValueError(f"vertex {v} has a child index outside 0..{k - 1}")


def children(v: VertexId, k: int) -> list[VertexId]:
    check_vertex(v, k)
    return [v.child(i) for i in range(k)]


def parent(v: VertexId) -> VertexId:
    if v.is_root:
        raise ValueError("the root has no parent")
    return VertexId(v.path[:-1])


def path_to_root(v: VertexId) -> list[VertexId]:
    """``[v, parent(v), ..., root]``."""
    return [VertexId(v.path[:d]) for d in range(v.depth, -1, -1)]


def generation_size(k: int, n: int) -> int:
    """|W_n|, the number of vertices at distance ``n`` from the root."""
    if n < 0:
        raise ValueError("depth must be >= 0")
    return k**n


def volume(k: int, n: int) -> int:
    """|V_n| = 1 + k + ... + k**n."""
    if k < 1 or n < 0:
        raise ValueError(f"need k >= 1 and n >= 0, got k={k}, n={n}")
    if k == 1:
        return n + 1
    return (k ** (n + 1) - 1) // (k - 1)


def generation(k: int, n: int) -> Iterator[VertexId]:
    """Vertices of W_n in lexicographic order."""
    for path in product(range(k), repeat=n):
        yield VertexId(path)


def vertices(k: int, n: int) -> Iterator[VertexId]:
    """Vertices of V_n in shortlex order (by depth, then lexicographically)."""
    for d in range(n + 1):
        yield from generation(k, d)


def index(v: VertexId, k: int) -> int:
    """Position of ``v`` in the shortlex order used by :func:`vertices`."""
    offset = volume(k, v.depth - 1) if v.depth else 0
    pos = 0
    for i in v.path:
        pos = pos * k + i
    return offset + pos
