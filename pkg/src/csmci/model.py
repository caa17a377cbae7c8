"""Ising model parameters, energies, conditionals, and the enumeration oracle.

The pairwise model assigns a configuration ``x`` (one alphabet value per
vertex) the probability ``exp(h.x + sum_e J_e x_i x_j) / Z``. Any finite
alphabet is supported; everything defaults to spins ``{-1, +1}``.

Exhaustive summation over all ``|X|**n`` states backs the exact operations.
It is deliberately capped (about a million states) and serves as the ground
truth that every sampling-based estimator in this package is tested against.
"""

from __future__ import annotations

import weakref
from pathlib import Path
from typing import Iterable, Mapping, NamedTuple

import numpy as np

from .errors import (
    ConfigurationError,
    EnumerationLimitError,
    UnsupportedAlphabetError,
)
from .graphs import Graph, Region, boundary_region
from .rng import as_generator

__all__ = [
    "ENUMERATION_CAP_STATES",
    "TargetFunction",
    "MONOMIAL",
    "IsingParams",
    "Moments",
    "StateSpace",
    "ExactDistribution",
    "state_space",
    "enumerate_patterns",
    "energy",
    "conditional_distribution",
    "exact_expectation",
    "exact_partition",
    "exact_log_partition",
    "exact_moments",
    "zero_params",
    "random_params",
    "load_model",
    "save_model",
    "parse_model_spec",
]

#: Hard cap on the number of states any exhaustive summation may touch.
#: 2**20 keeps the full-graph oracle under a second for binary n = 20.
ENUMERATION_CAP_STATES = 2**20


class TargetFunction:
    """Function of the variables in a target region.

    Either the monomial ``prod_{i in T} x_i`` (which covers the single-site
    and pair moments used everywhere) or an explicit value table over the
    canonical pattern enumeration of ``X**|T|``.
    """

    __slots__ = ("table",)

    def __init__(self, table: np.ndarray | None = None):
        self.table = None if table is None else np.asarray(table, dtype=np.float64)

    @classmethod
    def monomial(cls) -> "TargetFunction":
        return cls(None)

    @classmethod
    def from_table(cls, values: Iterable[float]) -> "TargetFunction":
        return cls(np.asarray(list(values), dtype=np.float64))

    @property
    def is_monomial(self) -> bool:
        return self.table is None

    def evaluate(self, patterns: np.ndarray, alphabet: tuple[float, ...] | None = None) -> np.ndarray:
        """Evaluate on a ``(num_patterns, |T|)`` array of target values."""
        patterns = np.asarray(patterns, dtype=np.float64)
        if self.is_monomial:
            return patterns.prod(axis=1) if patterns.shape[1] else np.ones(patterns.shape[0])
        if alphabet is None:
            raise ValueError("table-valued target functions need the alphabet to index patterns")
        idx = _pattern_indices(patterns, alphabet)
        if len(self.table) != len(alphabet) ** patterns.shape[1]:
            raise ValueError(
                f"value table has {len(self.table)} entries, expected "
                f"{len(alphabet) ** patterns.shape[1]}"
            )
        return self.table[idx]

    def __eq__(self, other) -> bool:
        if not isinstance(other, TargetFunction):
            return NotImplemented
        if self.is_monomial or other.is_monomial:
            return self.is_monomial and other.is_monomial
        return self.table.shape == other.table.shape and bool(np.all(self.table == other.table))

    def __hash__(self) -> int:
        return hash(None if self.is_monomial else self.table.tobytes())

    def __repr__(self) -> str:
        return "TargetFunction.monomial()" if self.is_monomial else f"TargetFunction(table={self.table!r})"


#: The default target function, f(x_T) = prod of the target spins.
MONOMIAL = TargetFunction.monomial()


class Moments(NamedTuple):
    """Per-vertex means and per-edge pair means, aligned with graph order."""

    means: np.ndarray
    pair_means: np.ndarray


def _validate_alphabet(alphabet) -> tuple[float, ...]:
    try:
        alph = tuple(float(v) for v in alphabet)
    except TypeError:
        raise UnsupportedAlphabetError(
            "alphabet must be a finite ordered collection of values; "
            "continuous sample spaces are not supported"
        ) from None
    if not alph:
        raise UnsupportedAlphabetError("alphabet must not be empty")
    if len(set(alph)) != len(alph):
        raise UnsupportedAlphabetError(f"alphabet values must be distinct, got {alph}")
    if not all(np.isfinite(alph)):
        raise UnsupportedAlphabetError(f"alphabet values must be finite, got {alph}")
    return alph


class IsingParams:
    """Immutable model parameters: fields ``h`` per vertex, couplings ``J`` per edge."""

    def __init__(self, graph: Graph, h, J, alphabet=(-1.0, 1.0)):
        h = np.array(h, dtype=np.float64)
        J = np.array(J, dtype=np.float64)
        if h.shape != (graph.n,):
            raise ValueError(f"h must have shape ({graph.n},), got {h.shape}")
        if J.shape != (graph.m,):
            raise ValueError(f"J must have shape ({graph.m},), got {J.shape}")
        h.setflags(write=False)
        J.setflags(write=False)
        self.graph = graph
        self.h = h
        self.J = J
        self.alphabet = _validate_alphabet(alphabet)
        self._arcs: tuple[np.ndarray, np.ndarray, np.ndarray] | None = None
        self._dist: "ExactDistribution | None" = None

    @property
    def is_binary(self) -> bool:
        return self.alphabet == (-1.0, 1.0)

    def arc_arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """CSR view of the weighted adjacency: (indptr, neighbor, J) per arc."""
        if self._arcs is None:
            g = self.graph
            indptr = np.zeros(g.n + 1, dtype=np.intp)
            targets = np.empty(2 * g.m, dtype=np.intp)
            weights = np.empty(2 * g.m, dtype=np.float64)
            pos = 0
            for i in range(g.n):
                for j in g.adjacency[i]:
                    targets[pos] = j
                    weights[pos] = self.J[g.edge_id(i, j)]
                    pos += 1
                indptr[i + 1] = pos
            targets.setflags(write=False)
            weights.setflags(write=False)
            self._arcs = (indptr, targets, weights)
        return self._arcs

    def with_updates(self, h=None, J=None) -> "IsingParams":
        return IsingParams(
            self.graph,
            self.h if h is None else h,
            self.J if J is None else J,
            self.alphabet,
        )

    def __repr__(self) -> str:
        return f"IsingParams({self.graph!r}, |X|={len(self.alphabet)})"


def zero_params(graph: Graph, alphabet=(-1.0, 1.0)) -> IsingParams:
    return IsingParams(graph, np.zeros(graph.n), np.zeros(graph.m), alphabet)


def random_params(
    graph: Graph,
    inv_temperature: float,
    seed,
    alphabet=(-1.0, 1.0),
    zero_field: bool = False,
) -> IsingParams:
    """Draw ``h`` and ``J`` independently from ``U[-1/T, +1/T]``."""
    w = float(inv_temperature)
    rng = as_generator(seed)
    h = np.zeros(graph.n) if zero_field else rng.uniform(-w, w, graph.n)
    J = rng.uniform(-w, w, graph.m)
    return IsingParams(graph, h, J, alphabet)


def _pattern_indices(patterns: np.ndarray, alphabet: tuple[float, ...]) -> np.ndarray:
    """Canonical flat index of each row under most-significant-first digits."""
    a = len(alphabet)
    k = patterns.shape[1]
    digits = np.zeros(patterns.shape, dtype=np.int64)
    for d, v in enumerate(alphabet):
        digits[patterns == v] = d
    idx = np.zeros(patterns.shape[0], dtype=np.int64)
    for j in range(k):
        idx = idx * a + digits[:, j]
    return idx


def enumerate_patterns(alphabet, k: int) -> np.ndarray:
    """All ``|X|**k`` value patterns, itertools.product order (first slot slowest)."""
    alph = np.asarray(_validate_alphabet(alphabet), dtype=np.float64)
    a = len(alph)
    n_states = a**k
    if n_states > ENUMERATION_CAP_STATES:
        raise EnumerationLimitError(f"{a}**{k} patterns exceed the enumeration cap")
    idx = np.arange(n_states, dtype=np.int64)
    out = np.empty((n_states, k), dtype=np.float64)
    for j in range(k):
        out[:, j] = alph[(idx // a ** (k - 1 - j)) % a]
    return out


def energy(p: IsingParams, x) -> float:
    """Hamiltonian ``-sum_i h_i x_i - sum_(i,j) J_ij x_i x_j``."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (p.graph.n,):
        raise ConfigurationError(f"configuration has shape {x.shape}, expected ({p.graph.n},)")
    e = float(p.h @ x)
    for k, (i, j) in enumerate(p.graph.edges):
        e += p.J[k] * x[i] * x[j]
    return -e


def _boundary_values(g: Graph, u: Region, boundary) -> tuple[Region, np.ndarray]:
    b = boundary_region(g, u)
    if isinstance(boundary, Mapping):
        try:
            vals = np.array([boundary[v] for v in b.members], dtype=np.float64)
        except KeyError as exc:
            raise ConfigurationError(f"boundary value missing for vertex {exc.args[0]}") from None
    else:
        vals = np.asarray(boundary, dtype=np.float64)
        if vals.shape != (len(b),):
            raise ConfigurationError(
                f"boundary has shape {vals.shape}, expected ({len(b)},) for region {u.members}"
            )
    return b, vals


def conditional_distribution(p: IsingParams, u: Region, boundary) -> np.ndarray:
    """Probability table of ``x_U`` given the boundary spins.

    The boundary is an array aligned with ``boundary_region(g, u).members``
    (or a vertex -> value mapping). Rows follow :func:`enumerate_patterns`
    order; the table is normalized with a log-sum-exp guard.
    """
    g = p.graph
    b, bvals = _boundary_values(g, u, boundary)
    a = len(p.alphabet)
    if a ** len(u) > ENUMERATION_CAP_STATES:
        raise EnumerationLimitError(f"sum region of {len(u)} vertices exceeds the enumeration cap")
    members = u.members
    local = {v: k for k, v in enumerate(members)}
    bpos = {v: k for k, v in enumerate(b.members)}
    # local fields fold the frozen boundary spins into each sum-region vertex
    bias = np.array([p.h[v] for v in members])
    for k, v in enumerate(members):
        for j in g.adjacency[v]:
            if j in bpos:
                bias[k] += p.J[g.edge_id(v, j)] * bvals[bpos[j]]
    patterns = enumerate_patterns(p.alphabet, len(members))
    logw = patterns @ bias
    for i, j in g.edges:
        if i in local and j in local:
            logw += p.J[g.edge_id(i, j)] * patterns[:, local[i]] * patterns[:, local[j]]
    logw -= logw.max()
    w = np.exp(logw)
    return w / w.sum()


# ---------------------------------------------------------------------------
# Exhaustive enumeration oracle
# ---------------------------------------------------------------------------


class StateSpace:
    """All ``|X|**n`` configurations of a graph, built lazily and cached per graph.

    States are stored transposed, one contiguous row per vertex, because every
    hot operation (energies, moments, marginals) walks whole vertex columns.
    """

    def __init__(self, graph: Graph, alphabet: tuple[float, ...]):
        self.graph = graph
        self.alphabet = _validate_alphabet(alphabet)
        a = len(self.alphabet)
        if a**graph.n > ENUMERATION_CAP_STATES:
            raise EnumerationLimitError(
                f"{a}**{graph.n} states exceed the enumeration cap of {ENUMERATION_CAP_STATES}"
            )
        self.n_states = a**graph.n
        idx = np.arange(self.n_states, dtype=np.int64)
        self.digits_t = np.empty((graph.n, self.n_states), dtype=np.int8)
        for j in range(graph.n):
            self.digits_t[j] = (idx // a ** (graph.n - 1 - j)) % a
        self._suff: np.ndarray | None = None
        self._marginal_idx: dict = {}

    def marginal_index(self, region: Region) -> np.ndarray:
        """Flat pattern index of every state restricted to the region (cached).

        Marginal tables over the same region are requested once per trial in
        the experiment loops; the index array is the expensive part.
        """
        key = region.members
        if key not in self._marginal_idx:
            if len(self._marginal_idx) >= 24:  # bounded: entries are n_states ints
                self._marginal_idx.pop(next(iter(self._marginal_idx)))
            a = len(self.alphabet)
            idx = np.zeros(self.n_states, dtype=np.int64)
            for v in key:
                idx *= a
                idx += self.digits_t[v]
            self._marginal_idx[key] = idx
        return self._marginal_idx[key]

    @property
    def suffstats_t(self) -> np.ndarray:
        """Sufficient statistics (n + m, n_states): vertex values, then edge products.

        One matrix so that energies and moments each cost a single BLAS pass.
        """
        if self._suff is None:
            g = self.graph
            s = np.empty((g.n + g.m, self.n_states))
            s[: g.n] = np.asarray(self.alphabet, dtype=np.float64)[self.digits_t]
            for k, (i, j) in enumerate(g.edges):
                np.multiply(s[i], s[j], out=s[g.n + k])
            self._suff = s
        return self._suff

    @property
    def values_t(self) -> np.ndarray:
        """Float value matrix (n, n_states)."""
        return self.suffstats_t[: self.graph.n]

    @property
    def values(self) -> np.ndarray:
        """Configuration-major view (n_states, n)."""
        return self.values_t.T

    def log_weights(self, h: np.ndarray, J: np.ndarray) -> np.ndarray:
        """Negative energy of every state."""
        theta = np.concatenate([np.asarray(h, dtype=np.float64), np.asarray(J, dtype=np.float64)])
        return theta @ self.suffstats_t

    def distribution(self, h, J) -> "ExactDistribution":
        logw = self.log_weights(np.asarray(h, float), np.asarray(J, float))
        shift = logw.max()
        logw -= shift
        np.exp(logw, out=logw)
        total = logw.sum()
        logw /= total
        return ExactDistribution(self, logw, float(shift + np.log(total)))


class ExactDistribution:
    """Boltzmann distribution tabulated over a :class:`StateSpace`."""

    def __init__(self, space: StateSpace, probs: np.ndarray, log_z: float):
        self.space = space
        self.probs = probs
        self.log_z = log_z
        self._means: np.ndarray | None = None

    def expectation(self, f: TargetFunction, t: Region) -> float:
        marg = self.marginal(t)
        pats = enumerate_patterns(self.space.alphabet, len(t))
        return float(marg @ f.evaluate(pats, self.space.alphabet))

    def marginal(self, region: Region) -> np.ndarray:
        """Marginal table over the region, canonical pattern order."""
        a = len(self.space.alphabet)
        k = len(region)
        if a**k > ENUMERATION_CAP_STATES:
            raise EnumerationLimitError(f"marginal over {k} vertices exceeds the enumeration cap")
        idx = self.space.marginal_index(region)
        return np.bincount(idx, weights=self.probs, minlength=a**k)

    def vertex_means(self) -> np.ndarray:
        if self._means is None:
            self._means = self.space.values_t @ self.probs
        return self._means

    def moments(self) -> Moments:
        vec = self.space.suffstats_t @ self.probs
        n = self.space.graph.n
        return Moments(vec[:n], vec[n:])


_SPACES: "weakref.WeakKeyDictionary[Graph, dict]" = weakref.WeakKeyDictionary()


def state_space(graph: Graph, alphabet=(-1.0, 1.0)) -> StateSpace:
    """Cached state space for (graph, alphabet); the matrices are expensive to build."""
    alph = _validate_alphabet(alphabet)
    per_graph = _SPACES.setdefault(graph, {})
    if alph not in per_graph:
        per_graph[alph] = StateSpace(graph, alph)
    return per_graph[alph]


def _distribution(p: IsingParams) -> ExactDistribution:
    """Exact distribution for a parameter set, cached on the (immutable) params."""
    if p._dist is None:
        p._dist = state_space(p.graph, p.alphabet).distribution(p.h, p.J)
    return p._dist


def exact_expectation(p: IsingParams, f: TargetFunction, t: Region) -> float:
    """Ground-truth expectation of ``f(x_T)`` by full enumeration."""
    return _distribution(p).expectation(f, t)


def exact_log_partition(p: IsingParams) -> float:
    return _distribution(p).log_z


def exact_partition(p: IsingParams) -> float:
    return float(np.exp(exact_log_partition(p)))


def exact_moments(p: IsingParams) -> Moments:
    """All per-vertex and per-edge moments in one enumeration pass."""
    return _distribution(p).moments()


# ---------------------------------------------------------------------------
# Model file format
# ---------------------------------------------------------------------------


def save_model(p: IsingParams, path: str | Path) -> None:
    """Write the plain-text model format: ``n m |X|`` header, alphabet, h, J lines."""
    g = p.graph
    lines = [f"{g.n} {g.m} {len(p.alphabet)}"]
    lines.append(" ".join(f"{v:.17g}" for v in p.alphabet))
    lines += [f"{i} {p.h[i]:.17g}" for i in range(g.n)]
    lines += [f"{i} {j} {p.J[k]:.17g}" for k, (i, j) in enumerate(g.edges)]
    Path(path).write_text("\n".join(lines) + "\n")


def load_model(path: str | Path, graph: Graph | None = None) -> IsingParams:
    """Read a model file; optionally bind it onto an existing (e.g. lattice) graph.

    When ``graph`` is given its edge set must match the file's, so lattice
    coordinates survive a round trip through the plain-text format.
    """
    lines = [ln.split() for ln in Path(path).read_text().splitlines() if ln.strip()]
    n, m, a = (int(v) for v in lines[0])
    alphabet = tuple(float(v) for v in lines[1])
    if len(alphabet) != a:
        raise ValueError(f"{path}: alphabet line has {len(alphabet)} values, header says {a}")
    h = np.zeros(n)
    for i_str, h_str in lines[2 : 2 + n]:
        h[int(i_str)] = float(h_str)
    edges, vals = [], []
    for i_str, j_str, j_val in lines[2 + n : 2 + n + m]:
        edges.append((int(i_str), int(j_str)))
        vals.append(float(j_val))
    if graph is None:
        graph = Graph(n, edges)
    elif graph.n != n or {(min(i, j), max(i, j)) for i, j in edges} != set(graph.edges):
        raise ValueError(f"{path}: edge set does not match the supplied graph")
    J = np.zeros(graph.m)
    for (i, j), v in zip(edges, vals):
        J[graph.edge_id(i, j)] = v
    return IsingParams(graph, h, J, alphabet)


def parse_model_spec(spec: str, graph: Graph, zero_field: bool = False) -> IsingParams:
    """CLI model spec: ``uniform:<1/T>:<seed>`` random draw, or a model file path."""
    if spec.startswith("uniform:"):
        _, invt, seed = spec.split(":")
        return random_params(graph, float(invt), int(seed), zero_field=zero_field)
    return load_model(spec, graph=graph)
