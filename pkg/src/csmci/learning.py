"""Maximum-likelihood inverse Ising learning with pluggable moment estimators.

Gradient ascent on the data log-likelihood: the positive term is the dataset
moment, the negative term is the model moment estimated per policy (exact
enumeration, plain MCI, single SMCI templates, or composite qCSMCI). Model
samples come from a bank of persistent Gibbs chains advanced a few sweeps per
epoch, never reinitialized.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import GraphMismatchError, IncompleteMomentsError, TrainingDivergedError
from .estimators import smci_estimate, template_spec
from .gls import RIDGE_EPSILON, compose
from .graphs import Graph, Region
from .model import IsingParams, Moments, state_space, zero_params
from .sampling import ChainBank, SampleSet, persistent_step

__all__ = [
    "POLICIES",
    "Dataset",
    "TrainConfig",
    "Trajectory",
    "MomentEstimator",
    "log_likelihood",
    "gradient",
    "train",
    "exact_ml",
    "parameter_mae",
]

#: Moment-estimation policies: template ladder and whether to GLS-compose it.
POLICIES = {
    "exact": ((), False),
    "mci": ((), False),
    "smci-I": (("I",), False),
    "smci-II": (("II",), False),
    "smci-III": (("III",), False),
    "qcsmci-I+II": (("I", "II"), True),
    "qcsmci-all": (("I", "II", "III"), True),
}


@dataclass(frozen=True)
class Dataset:
    """M observed configurations with cached per-vertex and per-edge moments."""

    graph: Graph
    points: np.ndarray
    vertex_means: np.ndarray = field(init=False)
    pair_means: np.ndarray = field(init=False)

    def __post_init__(self):
        pts = np.ascontiguousarray(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape != (pts.shape[0], self.graph.n) or pts.shape[0] < 1:
            raise ValueError(f"points must have shape (M, {self.graph.n}), got {pts.shape}")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "vertex_means", pts.mean(axis=0))
        pair = np.array([(pts[:, i] * pts[:, j]).mean() for i, j in self.graph.edges])
        object.__setattr__(self, "pair_means", pair)

    @classmethod
    def from_samples(cls, graph: Graph, samples: SampleSet) -> "Dataset":
        return cls(graph, samples.points)

    def __len__(self) -> int:
        return self.points.shape[0]


@dataclass(frozen=True)
class TrainConfig:
    """Gradient-ascent settings; eta = 0 is allowed (no-op updates)."""

    policy: str
    eta: float = 0.02
    epochs: int = 100
    n_chains: int = 1000
    kappa: int = 1
    seed: int = 0
    learn_fields: bool = True
    divergence_limit: float = 1e3

    def __post_init__(self):
        if self.policy not in POLICIES:
            raise ValueError(f"unknown policy {self.policy!r}; choose from {sorted(POLICIES)}")
        if self.eta < 0:
            raise ValueError(f"eta must be >= 0, got {self.eta}")
        if self.epochs < 1 or self.n_chains < 1 or self.kappa < 1:
            raise ValueError("epochs, n_chains, and kappa must all be >= 1")


@dataclass
class Trajectory:
    """Per-epoch parameter snapshots (epoch 0 is the zero initialization)."""

    graph: Graph
    h_history: np.ndarray
    j_history: np.ndarray
    h_mae: np.ndarray | None = None
    j_mae: np.ndarray | None = None

    def __len__(self) -> int:
        return self.h_history.shape[0]

    def params_at(self, epoch: int) -> IsingParams:
        return IsingParams(self.graph, self.h_history[epoch], self.j_history[epoch])

    @property
    def final_params(self) -> IsingParams:
        return self.params_at(len(self) - 1)

    def mae_against(self, reference: IsingParams) -> tuple[np.ndarray, np.ndarray]:
        """Parameter MAE of every snapshot against a reference model."""
        h_maes = np.abs(self.h_history - reference.h).mean(axis=1)
        j_maes = np.abs(self.j_history - reference.J).mean(axis=1)
        return h_maes, j_maes


class _TemplateBatch:
    """Specs whose plans share one shape, evaluated as a single tensor op."""

    def __init__(self, plans, positions):
        self.positions = np.asarray(positions, dtype=np.intp)
        p0 = plans[0]
        e = len(plans)
        self.patterns = p0.patterns  # (P, u), shared within a shape group
        self.u_members = np.stack([pl.u_members for pl in plans])  # (E, u)
        self.b_members = np.stack([pl.b_members for pl in plans])  # (E, b)
        self.fvals = np.stack([pl.fvals for pl in plans])  # (E, P)
        self.arc_eid = np.asarray([pl.arc_eid for pl in plans], dtype=np.intp)
        arc_local = np.asarray([pl.arc_local for pl in plans], dtype=np.intp)
        arc_bpos = np.asarray([pl.arc_bpos for pl in plans], dtype=np.intp)
        u, b = self.u_members.shape[1], self.b_members.shape[1]
        n_arcs = arc_local.shape[1]
        e_idx = np.repeat(np.arange(e, dtype=np.intp), n_arcs)
        self.w_flat = e_idx * (u * b) + arc_local.ravel() * b + arc_bpos.ravel()
        self.intra_eid = np.asarray([pl.intra_eid for pl in plans], dtype=np.intp)
        if self.intra_eid.size:
            self.pat_prod = np.stack(
                [
                    np.stack(
                        [p0.patterns[:, ii] * p0.patterns[:, jj] for ii, jj in zip(pl.intra_i, pl.intra_j)],
                        axis=1,
                    )
                    for pl in plans
                ]
            )  # (E, P, n_intra)
        else:
            self.pat_prod = None
        self.closed_form = p0.closed_form_ok

    def evaluate(self, p: IsingParams, points_t: np.ndarray, max_elems: int = 4_000_000) -> np.ndarray:
        """Per-sample conditional expectations, shape (E, N)."""
        e, u = self.u_members.shape
        b = self.b_members.shape[1]
        n = points_t.shape[1]
        p_count = self.patterns.shape[0]
        weights = np.zeros(e * u * b)
        weights[self.w_flat] = p.J[self.arc_eid.ravel()]
        w_mat = weights.reshape(e, u, b)
        h_u = p.h[self.u_members][:, :, None]
        intra = None
        if not self.closed_form and self.pat_prod is not None:
            intra = np.einsum("epi,ei->ep", self.pat_prod, p.J[self.intra_eid])[:, :, None]
        out = np.empty((e, n))
        step = n if self.closed_form else max(128, max_elems // max(1, e * p_count))
        flat_b = self.b_members.ravel()
        for s0 in range(0, n, step):
            sl = slice(s0, min(n, s0 + step))
            rows = points_t[flat_b, sl].reshape(e, b, -1)
            bias = w_mat @ rows
            bias += h_u
            if self.closed_form:
                out[:, sl] = np.tanh(bias[:, 0, :])
                continue
            logw = self.patterns @ bias  # (E, P, chunk)
            if intra is not None:
                logw += intra
            logw -= logw.max(axis=1, keepdims=True)
            np.exp(logw, out=logw)
            out[:, sl] = np.einsum("ep,epn->en", self.fvals, logw) / logw.sum(axis=1)
        return out


def _build_batches(graph: Graph, spec_lists, alphabet):
    """Group same-shape plans per ladder position; returns (batches, batchable mask)."""
    from .estimators import _plan

    n_targets = len(spec_lists)
    k_count = len(spec_lists[0]) if n_targets else 0
    plan_grid = [[_plan(graph, s, alphabet) for s in specs] for specs in spec_lists]
    # duplicate sum regions (degenerate 2-wide lattices) need compose()'s dedup
    batchable = np.array(
        [
            all(len(pl.b_members) > 0 for pl in plans)
            and len({s.sum_region for s in specs}) == len(specs)
            for plans, specs in zip(plan_grid, spec_lists)
        ],
        dtype=bool,
    )
    batches = []
    for k in range(k_count):
        groups: dict = {}
        for t in range(n_targets):
            if not batchable[t]:
                continue
            pl = plan_grid[t][k]
            key = (
                pl.patterns.shape,
                len(pl.b_members),
                len(pl.arc_local),
                len(pl.intra_eid),
                pl.closed_form_ok,
            )
            groups.setdefault(key, ([], []))
            groups[key][0].append(pl)
            groups[key][1].append(t)
        batches.append([_TemplateBatch(pls, pos) for pls, pos in groups.values()])
    return batches, batchable


class MomentEstimator:
    """Model-moment estimator bound to a graph and policy.

    The template ladder (one spec list per vertex and per adjacent-pair edge)
    is built once. Same-shaped specs are evaluated as batched tensor ops, and
    composite weights come from one batched solve; targets that cannot batch
    (empty sample regions, irregular shapes) fall back to the generic
    trace-and-compose route.
    """

    def __init__(self, graph: Graph, policy: str, alphabet=(-1.0, 1.0)):
        if policy not in POLICIES:
            raise ValueError(f"unknown policy {policy!r}; choose from {sorted(POLICIES)}")
        self.graph = graph
        self.policy = policy
        self.alphabet = alphabet
        templates, self.composite = POLICIES[policy]
        self.templates = templates
        self.vertex_specs = []
        self.edge_specs = []
        if templates:
            for v in graph.vertices:
                self.vertex_specs.append([template_spec(graph, Region([v]), k) for k in templates])
            for i, j in graph.edges:
                self.edge_specs.append([template_spec(graph, Region([i, j]), k) for k in templates])
            self._v_batches = _build_batches(graph, self.vertex_specs, alphabet)
            self._e_batches = _build_batches(graph, self.edge_specs, alphabet)

    def _fuse(self, p: IsingParams, specs, samples: SampleSet) -> float:
        traces = [smci_estimate(p, spec, samples) for spec in specs]
        if self.composite and len(traces) > 1:
            return compose(traces, sigma="sample").value
        return traces[0].mean

    def _estimate_side(self, p, samples, spec_lists, batch_info) -> np.ndarray:
        batches, batchable = batch_info
        n_targets = len(spec_lists)
        k_count = len(self.templates)
        n_pts = len(samples)
        points_t = np.ascontiguousarray(samples.points.T)
        vals = np.empty((n_targets, k_count, n_pts))
        for k in range(k_count):
            for batch in batches[k]:
                vals[batch.positions, k, :] = batch.evaluate(p, points_t)
        out = np.empty(n_targets)
        idx = np.flatnonzero(batchable)
        if idx.size:
            means = vals[idx].mean(axis=2)  # (B, K)
            if self.composite and k_count > 1:
                out[idx] = self._batched_composite(vals[idx], means, idx, spec_lists, p, samples)
            else:
                out[idx] = means[:, 0]
        for t in np.flatnonzero(~batchable):
            out[t] = self._fuse(p, spec_lists[t], samples)
        return out

    def _batched_composite(self, vals, means, idx, spec_lists, p, samples) -> np.ndarray:
        b_count, k_count, n_pts = vals.shape
        if n_pts < 2:
            return np.array([self._fuse(p, spec_lists[t], samples) for t in idx])
        resid = vals - means[:, :, None]
        cov = (resid @ resid.transpose(0, 2, 1)) / ((n_pts - 1) * n_pts)
        trace = np.trace(cov, axis1=1, axis2=2)
        ridge = RIDGE_EPSILON * np.where(trace > 0, trace / k_count, 1.0)
        diag = np.arange(k_count)
        cov[:, diag, diag] += ridge[:, None]
        try:
            rhs = np.ones((b_count, k_count, 1))
            x = np.linalg.solve(cov, rhs)[:, :, 0]
            omega = x.sum(axis=1)
            good = np.isfinite(omega) & (omega > 0) & np.all(np.isfinite(x), axis=1)
        except np.linalg.LinAlgError:
            good = np.zeros(b_count, dtype=bool)
            x = np.empty((b_count, k_count))
            omega = np.ones(b_count)
        out = (x * means).sum(axis=1) / omega
        for pos in np.flatnonzero(~good):
            out[pos] = self._fuse(p, spec_lists[idx[pos]], samples)
        return out

    def __call__(self, p: IsingParams, samples: SampleSet | None) -> Moments:
        if self.policy == "exact":
            return state_space(p.graph, p.alphabet).distribution(p.h, p.J).moments()
        if samples is None:
            raise ValueError(f"policy {self.policy!r} needs a sample set")
        if self.policy == "mci":
            pts = samples.points
            pair = np.array([(pts[:, i] * pts[:, j]).mean() for i, j in self.graph.edges])
            return Moments(pts.mean(axis=0), pair)
        means = self._estimate_side(p, samples, self.vertex_specs, self._v_batches)
        pairs = self._estimate_side(p, samples, self.edge_specs, self._e_batches)
        return Moments(means, pairs)


def log_likelihood(p: IsingParams, d: Dataset) -> float:
    """Mean data log-probability; needs the exact log partition function."""
    if d.graph is not p.graph and (d.graph.n != p.graph.n or d.graph.edges != p.graph.edges):
        raise GraphMismatchError("dataset and parameters live on different graphs")
    logw = d.points @ p.h
    for k, (i, j) in enumerate(p.graph.edges):
        logw += p.J[k] * d.points[:, i] * d.points[:, j]
    dist = state_space(p.graph, p.alphabet).distribution(p.h, p.J)
    return float(logw.mean() - dist.log_z)


def gradient(p: IsingParams, d: Dataset, moment_estimates: Moments) -> tuple[np.ndarray, np.ndarray]:
    """Log-likelihood gradient: data moments minus estimated model moments."""
    means = np.asarray(moment_estimates.means, dtype=np.float64)
    pairs = np.asarray(moment_estimates.pair_means, dtype=np.float64)
    if means.shape != (p.graph.n,) or pairs.shape != (p.graph.m,):
        raise IncompleteMomentsError(
            f"moment estimates have shapes {means.shape}/{pairs.shape}, "
            f"expected ({p.graph.n},)/({p.graph.m},)"
        )
    if not (np.all(np.isfinite(means)) and np.all(np.isfinite(pairs))):
        raise IncompleteMomentsError("moment estimates contain non-finite values")
    return d.vertex_means - means, d.pair_means - pairs


def train(
    g: Graph,
    d: Dataset,
    cfg: TrainConfig,
    reference: IsingParams | None = None,
) -> Trajectory:
    """Gradient-ascent learning from zero initialization.

    Each epoch advances the persistent chains kappa sweeps under the current
    parameters, estimates the model moments per policy, and takes one ascent
    step. Aborts if any parameter magnitude passes the divergence guard.
    """
    p = zero_params(g)
    estimator = MomentEstimator(g, cfg.policy)
    # exact moments never touch the chains, so skip the bank entirely
    bank = None if cfg.policy == "exact" else ChainBank(p, cfg.n_chains, cfg.seed)
    h_hist = np.empty((cfg.epochs + 1, g.n))
    j_hist = np.empty((cfg.epochs + 1, g.m))
    h_hist[0], j_hist[0] = p.h, p.J
    for epoch in range(1, cfg.epochs + 1):
        samples = persistent_step(p, bank, cfg.kappa) if bank is not None else None
        grad_h, grad_j = gradient(p, d, estimator(p, samples))
        h = p.h + cfg.eta * grad_h if cfg.learn_fields else p.h
        j = p.J + cfg.eta * grad_j
        if max(np.abs(h).max(initial=0.0), np.abs(j).max(initial=0.0)) > cfg.divergence_limit:
            raise TrainingDivergedError(
                f"parameter magnitude exceeded {cfg.divergence_limit:g} at epoch {epoch}"
            )
        p = p.with_updates(h, j)
        h_hist[epoch], j_hist[epoch] = h, j
    traj = Trajectory(g, h_hist, j_hist)
    if reference is not None:
        traj.h_mae, traj.j_mae = traj.mae_against(reference)
    return traj


def exact_ml(
    g: Graph,
    d: Dataset,
    eta: float = 0.5,
    tol: float = 1e-8,
    max_iter: int = 10**6,
    init: IsingParams | None = None,
) -> IsingParams:
    """Exact maximum likelihood by gradient ascent with enumerated moments.

    Runs until the gradient max-norm drops below ``tol``. The likelihood is
    concave, so any starting point converges to the same optimum; a warm
    start just saves iterations. On non-convergence the best iterate is
    returned with a warning.
    """
    space = state_space(g)
    h = np.zeros(g.n) if init is None else np.array(init.h, dtype=np.float64)
    j = np.zeros(g.m) if init is None else np.array(init.J, dtype=np.float64)
    best = (np.inf, h.copy(), j.copy())
    for _ in range(max_iter):
        mom = space.distribution(h, j).moments()
        grad_h = d.vertex_means - mom.means
        grad_j = d.pair_means - mom.pair_means
        gnorm = max(np.abs(grad_h).max(initial=0.0), np.abs(grad_j).max(initial=0.0))
        if not np.isfinite(gnorm) or gnorm > 1e8:
            warnings.warn("exact ML gradient ascent diverged; returning best iterate", stacklevel=2)
            return IsingParams(g, best[1], best[2])
        if gnorm < best[0]:
            best = (gnorm, h.copy(), j.copy())
        if gnorm < tol:
            return IsingParams(g, h, j)
        h = h + eta * grad_h
        j = j + eta * grad_j
    warnings.warn(
        f"exact ML did not reach tol={tol:g} in {max_iter} iterations "
        f"(best gradient max-norm {best[0]:.3g})",
        stacklevel=2,
    )
    return IsingParams(g, best[1], best[2])


def parameter_mae(p: IsingParams, ref: IsingParams) -> tuple[float, float]:
    """Mean absolute deviation over vertices and over edges."""
    if p.graph is not ref.graph and (p.graph.n != ref.graph.n or p.graph.edges != ref.graph.edges):
        raise GraphMismatchError("parameter sets live on different graphs")
    h_mae = float(np.abs(p.h - ref.h).mean())
    j_mae = float(np.abs(p.J - ref.J).mean()) if p.graph.m else 0.0
    return h_mae, j_mae
