"""Gibbs sampling: batch sample sets and persistent chain banks.

Randomness comes from numpy's Philox counter-based generator. A sample run is
fully determined by (seed, model, schedule); persistent banks give every
chain its own substream derived from (master seed, chain index), so chains
are independent of execution order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import EmptySampleError
from .model import IsingParams, state_space
from .rng import as_generator, substream

__all__ = [
    "SampleSet",
    "ChainBank",
    "as_generator",
    "gibbs_sweep",
    "draw_sample_set",
    "draw_exact_sample_set",
    "persistent_step",
    "save_samples_csv",
]


@dataclass(frozen=True)
class SampleSet:
    """N full configurations plus the schedule that produced them."""

    points: np.ndarray
    seed: int | None = None
    burn_in: int = 0
    interval: int = 0

    def __post_init__(self):
        pts = np.ascontiguousarray(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[0] < 1:
            raise EmptySampleError(f"sample set needs shape (N, n) with N >= 1, got {pts.shape}")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def n_vertices(self) -> int:
        return self.points.shape[1]


def _uniform_init(p: IsingParams, rng: np.random.Generator) -> np.ndarray:
    """One uniform configuration; consumes exactly n uniforms."""
    alph = np.asarray(p.alphabet)
    idx = np.minimum((rng.random(p.graph.n) * len(alph)).astype(np.intp), len(alph) - 1)
    return np.ascontiguousarray(alph[idx])


def _sweep_generic(p: IsingParams, state: np.ndarray, u: np.ndarray, order=None) -> None:
    """One sweep for an arbitrary finite alphabet (ascending order by default)."""
    alph = np.asarray(p.alphabet)
    indptr, targets, weights = p.arc_arrays()
    sites = range(p.graph.n) if order is None else order
    for k, i in enumerate(sites):
        b = p.h[i]
        for a in range(indptr[i], indptr[i + 1]):
            b += weights[a] * state[targets[a]]
        logw = b * alph
        w = np.exp(logw - logw.max())
        c = np.cumsum(w)
        j = int(np.searchsorted(c, u[k] * c[-1], side="right"))
        state[i] = alph[min(j, len(alph) - 1)]


def _one_sweep(p: IsingParams, state: np.ndarray, gen: np.random.Generator, scan: str) -> None:
    """One sweep; a random scan draws the visit order before its uniforms."""
    n = p.graph.n
    if scan == "random":
        order = gen.permutation(n).astype(np.intp)
        u = gen.random(n)
        if p.is_binary:
            indptr, targets, weights = p.arc_arrays()
            kernels.run_sweeps_binary_ordered(
                state, p.h, indptr, targets, weights, u[None, :],
                np.ascontiguousarray(order[None, :]),
            )
        else:
            _sweep_generic(p, state, u, order)
    else:
        u = gen.random((1, n))
        if p.is_binary:
            indptr, targets, weights = p.arc_arrays()
            kernels.run_sweeps_binary(state, p.h, indptr, targets, weights, u)
        else:
            _sweep_generic(p, state, u[0])


def _check_scan(scan: str) -> None:
    if scan not in ("fixed", "random"):
        raise ValueError(f"scan must be 'fixed' or 'random', got {scan!r}")


def gibbs_sweep(p: IsingParams, x, rng, scan: str = "fixed") -> np.ndarray:
    """One full Gibbs sweep; returns the updated configuration.

    The default visits sites in fixed ascending order; ``scan="random"``
    draws a fresh visit permutation per sweep.
    """
    _check_scan(scan)
    gen = as_generator(rng)
    state = np.array(x, dtype=np.float64)
    if state.shape != (p.graph.n,):
        raise EmptySampleError(f"configuration has shape {state.shape}, expected ({p.graph.n},)")
    _one_sweep(p, state, gen, scan)
    return state


def draw_sample_set(p: IsingParams, n_points: int, r: int, rng, scan: str = "fixed") -> SampleSet:
    """Single-chain sampler: r burn-in sweeps, then one record every r sweeps.

    With r = 0 every recorded point is a fresh uniform configuration (the
    chain never moves, so records are i.i.d. uniform by construction).
    """
    if n_points < 1:
        raise EmptySampleError(f"n_points must be >= 1, got {n_points}")
    if r < 0:
        raise ValueError(f"r must be >= 0, got {r}")
    _check_scan(scan)
    seed = int(rng) if isinstance(rng, (int, np.integer)) else None
    gen = as_generator(rng)
    n = p.graph.n
    state = _uniform_init(p, gen)
    points = np.empty((n_points, n))
    if r == 0:
        points[0] = state
        for k in range(1, n_points):
            points[k] = _uniform_init(p, gen)
        return SampleSet(points, seed=seed, burn_in=0, interval=0)
    if p.is_binary and scan == "fixed":
        indptr, targets, weights = p.arc_arrays()
        # burn-in, recording the first point at its end
        kernels.run_chain_binary(state, p.h, indptr, targets, weights,
                                 gen.random((r, n)), points[:1], r)
        done = 1
        block = max(1, (1 << 21) // (r * n))  # bounded uniform buffers
        while done < n_points:
            k = min(block, n_points - done)
            kernels.run_chain_binary(state, p.h, indptr, targets, weights,
                                     gen.random((k * r, n)), points[done : done + k], r)
            done += k
    else:
        for k in range(n_points):
            for _ in range(r):
                _one_sweep(p, state, gen, scan)
            points[k] = state
    return SampleSet(points, seed=seed, burn_in=r, interval=r)


def draw_exact_sample_set(p: IsingParams, n_points: int, rng) -> SampleSet:
    """I.i.d. sampling by enumeration inverse-CDF; exact but capped to small graphs."""
    if n_points < 1:
        raise EmptySampleError(f"n_points must be >= 1, got {n_points}")
    gen = as_generator(rng)
    space = state_space(p.graph, p.alphabet)
    cdf = np.cumsum(space.distribution(p.h, p.J).probs)
    idx = np.minimum(np.searchsorted(cdf, gen.random(n_points), side="right"), space.n_states - 1)
    return SampleSet(space.values[idx], seed=None, burn_in=0, interval=0)


class ChainBank:
    """N persistent Gibbs chains advanced in place across training epochs."""

    def __init__(self, p: IsingParams, n_chains: int, seed: int):
        if n_chains < 1:
            raise EmptySampleError(f"need at least one chain, got {n_chains}")
        self.master_seed = int(seed)
        self.alphabet = p.alphabet
        self.n = p.graph.n
        self.generators = [substream(seed, c) for c in range(n_chains)]
        self.states = np.empty((n_chains, self.n))
        for c, gen in enumerate(self.generators):
            self.states[c] = _uniform_init(p, gen)
        self.sweeps_done = 0

    @property
    def n_chains(self) -> int:
        return self.states.shape[0]


def persistent_step(p: IsingParams, bank: ChainBank, kappa: int) -> SampleSet:
    """Advance every chain kappa sweeps under the current parameters.

    Returns the bank's current states as this epoch's sample set. Chains are
    never reinitialized.
    """
    if kappa < 1:
        raise ValueError(f"kappa must be >= 1, got {kappa}")
    n, c_count = bank.n, bank.n_chains
    uniforms = np.empty((c_count, kappa, n))
    for c, gen in enumerate(bank.generators):
        uniforms[c] = gen.random((kappa, n))
    if p.is_binary and bank.alphabet == (-1.0, 1.0):
        indptr, targets, weights = p.arc_arrays()
        kernels.advance_bank_binary(bank.states, p.h, indptr, targets, weights, uniforms)
    else:
        for c in range(c_count):
            st = bank.states[c].copy()
            for t in range(kappa):
                _sweep_generic(p, st, uniforms[c, t])
            bank.states[c] = st
    bank.sweeps_done += kappa
    return SampleSet(bank.states.copy(), seed=bank.master_seed, burn_in=0, interval=kappa)


def save_samples_csv(s: SampleSet, path) -> None:
    """One row per point; integer entries when the values are all integral."""
    pts = s.points
    if np.all(pts == np.round(pts)):
        np.savetxt(path, pts.astype(np.int64), fmt="%d", delimiter=",")
    else:
        np.savetxt(path, pts, fmt="%.17g", delimiter=",")
