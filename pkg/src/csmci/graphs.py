"""Graphs, regions, and sum-region templates.

Vertices are integers ``0..n-1``. Edges are unordered pairs stored once in
canonical ``(min, max)`` form. Lattice constructors attach row/column
coordinates, which the pictorial sum-region templates require; graphs loaded
from edge lists carry no coordinates and reject templates.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

from .errors import InvalidDimensionError, InvalidRegionError, UnsupportedTemplateError

__all__ = [
    "Graph",
    "Region",
    "LatticeInfo",
    "SINGLE_TEMPLATES",
    "PAIR_TEMPLATES",
    "build_torus",
    "build_lattice_free",
    "build_graph",
    "boundary_region",
    "instantiate_template",
    "load_graph",
    "save_graph",
    "parse_graph_spec",
]

#: Template kinds defined for single-vertex targets (vertical, horizontal,
#: target-only, then the four one-sided half templates).
SINGLE_TEMPLATES = ("I", "II", "III", "IV", "V", "VI", "VII")

#: Template kinds defined for adjacent-pair targets.
PAIR_TEMPLATES = ("I", "II", "III")


@dataclass(frozen=True)
class LatticeInfo:
    rows: int
    cols: int
    periodic: bool


@dataclass(frozen=True)
class Region:
    """Canonical (sorted, duplicate-free) vertex subset."""

    members: tuple[int, ...]

    def __init__(self, members: Iterable[int] = ()):
        object.__setattr__(self, "members", tuple(sorted({int(v) for v in members})))

    def __len__(self) -> int:
        return len(self.members)

    def __iter__(self):
        return iter(self.members)

    def __contains__(self, v: int) -> bool:
        return v in self.members

    def issubset(self, other: "Region") -> bool:
        return set(self.members) <= set(other.members)

    def union(self, other: "Region") -> "Region":
        return Region(self.members + other.members)


class Graph:
    """Undirected graph with a canonical edge list.

    Attributes:
        n: number of vertices.
        edges: tuple of canonical ``(i, j)`` pairs with ``i < j``, sorted.
        adjacency: per-vertex sorted neighbor tuples.
        lattice: optional :class:`LatticeInfo` when built by a lattice
            constructor (enables sum-region templates).
    """

    def __init__(self, n: int, edges: Iterable[tuple[int, int]], lattice: LatticeInfo | None = None):
        n = int(n)
        if n < 1:
            raise InvalidDimensionError(f"graph needs at least one vertex, got n={n}")
        canonical: set[tuple[int, int]] = set()
        for i, j in edges:
            i, j = int(i), int(j)
            if i == j:
                raise ValueError(f"self-loop on vertex {i} is not allowed")
            if not (0 <= i < n and 0 <= j < n):
                raise ValueError(f"edge ({i},{j}) out of range for n={n}")
            canonical.add((min(i, j), max(i, j)))
        self.n = n
        self.edges: tuple[tuple[int, int], ...] = tuple(sorted(canonical))
        self.m = len(self.edges)
        adj: list[list[int]] = [[] for _ in range(n)]
        for i, j in self.edges:
            adj[i].append(j)
            adj[j].append(i)
        self.adjacency: tuple[tuple[int, ...], ...] = tuple(tuple(sorted(a)) for a in adj)
        self.edge_index: dict[tuple[int, int], int] = {e: k for k, e in enumerate(self.edges)}
        self.lattice = lattice

    @property
    def vertices(self) -> range:
        return range(self.n)

    def neighbors(self, v: int) -> tuple[int, ...]:
        return self.adjacency[v]

    def degree(self, v: int) -> int:
        return len(self.adjacency[v])

    def edge_id(self, i: int, j: int) -> int:
        try:
            return self.edge_index[(min(i, j), max(i, j))]
        except KeyError:
            raise KeyError(f"({i},{j}) is not an edge") from None

    def has_edge(self, i: int, j: int) -> bool:
        return (min(i, j), max(i, j)) in self.edge_index

    def row_col(self, v: int) -> tuple[int, int]:
        if self.lattice is None:
            raise UnsupportedTemplateError("graph has no lattice coordinates")
        return divmod(v, self.lattice.cols)

    def vertex_at(self, row: int, col: int) -> int:
        if self.lattice is None:
            raise UnsupportedTemplateError("graph has no lattice coordinates")
        return row * self.lattice.cols + col

    def __repr__(self) -> str:
        kind = ""
        if self.lattice is not None:
            wrap = "torus" if self.lattice.periodic else "lattice"
            kind = f", {wrap}={self.lattice.rows}x{self.lattice.cols}"
        return f"Graph(n={self.n}, m={self.m}{kind})"


def build_torus(rows: int, cols: int) -> Graph:
    """Square grid with periodic boundaries; every vertex has degree 4.

    Degenerate 2-wide dimensions produce parallel wrap edges that collapse
    to a single edge in the canonical edge set.
    """
    if rows < 2 or cols < 2:
        raise InvalidDimensionError(f"torus needs rows, cols >= 2, got {rows}x{cols}")
    edges = []
    for r in range(rows):
        for c in range(cols):
            v = r * cols + c
            edges.append((v, ((r + 1) % rows) * cols + c))
            edges.append((v, r * cols + (c + 1) % cols))
    return Graph(rows * cols, edges, lattice=LatticeInfo(rows, cols, periodic=True))


def build_lattice_free(rows: int, cols: int) -> Graph:
    """Square lattice with free boundaries; corners have degree 2."""
    if rows < 1 or cols < 1:
        raise InvalidDimensionError(f"lattice needs rows, cols >= 1, got {rows}x{cols}")
    edges = []
    for r in range(rows):
        for c in range(cols):
            v = r * cols + c
            if r + 1 < rows:
                edges.append((v, (r + 1) * cols + c))
            if c + 1 < cols:
                edges.append((v, v + 1))
    return Graph(rows * cols, edges, lattice=LatticeInfo(rows, cols, periodic=False))


def build_graph(n: int, edges: Iterable[tuple[int, int]]) -> Graph:
    """General graph from an explicit edge list (no lattice coordinates)."""
    return Graph(n, edges)


def _check_region(g: Graph, u: Region) -> None:
    if len(u) and (u.members[0] < 0 or u.members[-1] >= g.n):
        raise InvalidRegionError(f"region {u.members} not within graph of size {g.n}")


def boundary_region(g: Graph, u: Region) -> Region:
    """Outer adjacent region: vertices outside ``u`` with a neighbor in ``u``."""
    _check_region(g, u)
    inside = set(u.members)
    out = {j for i in inside for j in g.adjacency[i] if j not in inside}
    return Region(out)


def _shifted(g: Graph, v: int, dr: int, dc: int) -> int | None:
    """Lattice neighbor of ``v`` at offset (dr, dc); None when clipped off the grid."""
    assert g.lattice is not None
    rows, cols = g.lattice.rows, g.lattice.cols
    r, c = divmod(v, cols)
    if g.lattice.periodic:
        return ((r + dr) % rows) * cols + (c + dc) % cols
    r, c = r + dr, c + dc
    if 0 <= r < rows and 0 <= c < cols:
        return r * cols + c
    return None


_TEMPLATE_OFFSETS = {
    "I": ((-1, 0), (1, 0)),
    "II": ((0, -1), (0, 1)),
    "III": (),
    "IV": ((-1, 0),),
    "V": ((1, 0),),
    "VI": ((0, -1),),
    "VII": ((0, 1),),
}


def instantiate_template(g: Graph, target: Region, kind: str) -> Region:
    """Sum region for a pictorial template, clipped to the vertex set.

    Template I extends the target with its vertical nearest neighbors, II
    with its horizontal ones, III is the target itself, and IV-VII add a
    single neighbor (up, down, left, right; single-vertex targets only).
    At free-lattice edges the overhang is cut off.
    """
    if g.lattice is None:
        raise UnsupportedTemplateError("sum-region templates require a lattice graph")
    _check_region(g, target)
    arity = len(target)
    if arity == 1:
        allowed = SINGLE_TEMPLATES
    elif arity == 2:
        allowed = PAIR_TEMPLATES
        i, j = target.members
        if not g.has_edge(i, j):
            raise UnsupportedTemplateError(f"pair target {target.members} is not an adjacent pair")
    else:
        raise UnsupportedTemplateError(f"templates are defined for 1- or 2-vertex targets, got {arity}")
    if kind not in allowed:
        raise UnsupportedTemplateError(f"template {kind!r} not defined for a {arity}-vertex target")
    members = list(target.members)
    for v in target.members:
        for dr, dc in _TEMPLATE_OFFSETS[kind]:
            w = _shifted(g, v, dr, dc)
            if w is not None:
                members.append(w)
    return Region(members)


def load_graph(path: str | Path) -> Graph:
    """Read the plain-text edge-list format: ``n m`` header then ``i j`` lines."""
    lines = [ln.split() for ln in Path(path).read_text().splitlines() if ln.strip()]
    if not lines or len(lines[0]) != 2:
        raise ValueError(f"{path}: expected 'n m' header")
    n, m = int(lines[0][0]), int(lines[0][1])
    if len(lines) - 1 != m:
        raise ValueError(f"{path}: header promises {m} edges, found {len(lines) - 1}")
    return Graph(n, [(int(a), int(b)) for a, b in lines[1:]])


def save_graph(g: Graph, path: str | Path) -> None:
    out = [f"{g.n} {g.m}"]
    out += [f"{i} {j}" for i, j in g.edges]
    Path(path).write_text("\n".join(out) + "\n")


def parse_graph_spec(spec: str) -> Graph:
    """Build a graph from a CLI spec: ``torus:RxC``, ``lattice:RxC``, or a file path."""
    if ":" in spec:
        kind, _, dims = spec.partition(":")
        if kind in ("torus", "lattice"):
            try:
                rows, cols = (int(d) for d in dims.lower().split("x"))
            except ValueError:
                raise InvalidDimensionError(f"bad lattice dimensions in {spec!r}") from None
            return build_torus(rows, cols) if kind == "torus" else build_lattice_free(rows, cols)
    return load_graph(spec)
