"""Composite estimation: fuse K spatial estimators sharing one sample set.

The fused value is the generalized-least-squares solution c = S^-1 1 / (1' S^-1 1)
applied to the component means, where S is either the exact covariance of the
component estimators (by enumeration) or its unbiased sample estimate. The
fused variance is 1 / (1' S^-1 1).

Covariance matrices are conditioned with a tiny trace-scaled ridge before the
solve; if that still fails (or yields a nonpositive element sum), weights
fall back to uniform and the estimate is flagged rather than aborting.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .errors import (
    InsufficientSamplesError,
    SingularCovarianceError,
    TraceMismatchError,
)
from .estimators import ComponentTrace, EstimatorSpec, _evaluate_plan, _plan
from .graphs import Region
from .model import IsingParams, enumerate_patterns

__all__ = [
    "RIDGE_EPSILON",
    "CovarianceMatrix",
    "Conditioning",
    "CompositeEstimate",
    "sample_covariance",
    "exact_covariance",
    "gls_weights",
    "lagrange_weights",
    "fisher_information",
    "compose",
]

#: Relative ridge added to the covariance diagonal before every solve.
RIDGE_EPSILON = 1e-10


@dataclass(frozen=True)
class CovarianceMatrix:
    """K x K covariance of the component estimators (exact or sample kind)."""

    entries: np.ndarray
    kind: str

    def __post_init__(self):
        e = np.array(self.entries, dtype=np.float64)
        if e.ndim != 2 or e.shape[0] != e.shape[1]:
            raise ValueError(f"covariance must be square, got shape {e.shape}")
        scale = max(1.0, float(np.abs(e).max())) if e.size else 1.0
        if float(np.abs(e - e.T).max(initial=0.0)) > 1e-12 * scale:
            raise ValueError("covariance matrix is not symmetric within 1e-12")
        e = (e + e.T) / 2.0
        e.setflags(write=False)
        object.__setattr__(self, "entries", e)
        if self.kind not in ("exact", "sample"):
            raise ValueError(f"kind must be 'exact' or 'sample', got {self.kind!r}")

    @property
    def k(self) -> int:
        return self.entries.shape[0]


@dataclass(frozen=True)
class Conditioning:
    """Diagnostics of the covariance solve behind a composite estimate."""

    ridge: float
    condition: float
    fallback: bool


@dataclass(frozen=True)
class CompositeEstimate:
    components: np.ndarray
    weights: np.ndarray
    value: float
    variance: float
    covariance: CovarianceMatrix
    conditioning: Conditioning
    specs: tuple[EstimatorSpec, ...] = ()


def _as_cov(sigma) -> CovarianceMatrix:
    return sigma if isinstance(sigma, CovarianceMatrix) else CovarianceMatrix(np.asarray(sigma), "exact")


def _ridged(entries: np.ndarray) -> tuple[np.ndarray, float]:
    k = entries.shape[0]
    tr = float(np.trace(entries))
    ridge = RIDGE_EPSILON * (tr / k if tr > 0 else 1.0)
    return entries + ridge * np.eye(k), ridge


def _condition_estimate(a: np.ndarray) -> float:
    try:
        ev = np.linalg.eigvalsh(a)
    except np.linalg.LinAlgError:
        return float("inf")
    if ev[0] <= 0:
        return float("inf")
    return float(ev[-1] / ev[0])


def _solve_weights(entries: np.ndarray) -> tuple[np.ndarray, float, Conditioning]:
    """GLS weights, fused variance, and solve diagnostics for one covariance."""
    k = entries.shape[0]
    a, ridge = _ridged(entries)
    cond = _condition_estimate(a)
    try:
        factor = cho_factor(a, lower=True)
        x = cho_solve(factor, np.ones(k))
        omega = float(x.sum())
        if np.isfinite(omega) and omega > 0 and np.all(np.isfinite(x)):
            return x / omega, 1.0 / omega, Conditioning(ridge, cond, fallback=False)
    except (LinAlgError, np.linalg.LinAlgError):
        pass
    w = np.full(k, 1.0 / k)
    return w, float(w @ entries @ w), Conditioning(ridge, cond, fallback=True)


def gls_weights(sigma) -> np.ndarray:
    """Normalized weights Sigma^-1 1 / (1' Sigma^-1 1); uniform fallback when singular."""
    cov = _as_cov(sigma)
    if cov.k == 1:
        return np.ones(1)
    w, _, diag = _solve_weights(cov.entries)
    if diag.fallback:
        warnings.warn("covariance solve failed; using uniform composite weights", stacklevel=2)
    return w


def lagrange_weights(sigma) -> np.ndarray:
    """Minimize w' Sigma w subject to sum(w) = 1 via the KKT linear system.

    Agrees with :func:`gls_weights` to floating precision; kept as an
    independent route for cross-checking.
    """
    cov = _as_cov(sigma)
    k = cov.k
    if k == 1:
        return np.ones(1)
    a, _ = _ridged(cov.entries)
    kkt = np.zeros((k + 1, k + 1))
    kkt[:k, :k] = 2.0 * a
    kkt[:k, k] = -1.0
    kkt[k, :k] = 1.0
    rhs = np.zeros(k + 1)
    rhs[k] = 1.0
    try:
        sol = np.linalg.solve(kkt, rhs)
    except np.linalg.LinAlgError:
        warnings.warn("KKT solve failed; using uniform composite weights", stacklevel=2)
        return np.full(k, 1.0 / k)
    w = sol[:k]
    if not np.all(np.isfinite(w)):
        warnings.warn("KKT solve failed; using uniform composite weights", stacklevel=2)
        return np.full(k, 1.0 / k)
    return w


def fisher_information(sigma) -> float:
    """Element sum of Sigma^-1; its inverse equals the composite variance."""
    cov = _as_cov(sigma)
    a, _ = _ridged(cov.entries)
    try:
        x = cho_solve(cho_factor(a, lower=True), np.ones(cov.k))
    except (LinAlgError, np.linalg.LinAlgError) as exc:
        raise SingularCovarianceError(f"covariance is singular: {exc}") from None
    omega = float(x.sum())
    if not np.isfinite(omega) or omega <= 0:
        raise SingularCovarianceError(f"element sum of the inverse is not positive ({omega})")
    return omega


def sample_covariance(traces: list[ComponentTrace]) -> CovarianceMatrix:
    """Unbiased sample covariance of the component estimators, scaled by 1/N."""
    if not traces:
        raise TraceMismatchError("need at least one component trace")
    n = len(traces[0])
    if any(len(t) != n for t in traces):
        raise TraceMismatchError(f"traces disagree on N: {[len(t) for t in traces]}")
    if n < 2:
        raise InsufficientSamplesError(f"sample covariance needs N >= 2, got N={n}")
    k = len(traces)
    if n < k + 1:
        warnings.warn(f"sample covariance with N={n} < K+1={k + 1} is rank deficient", stacklevel=2)
    r = np.stack([t.values - t.mean for t in traces])
    entries = (r @ r.T) / ((n - 1) * n)
    return CovarianceMatrix((entries + entries.T) / 2.0, "sample")


def exact_covariance(p: IsingParams, specs: list[EstimatorSpec], n_points: int) -> CovarianceMatrix:
    """True covariance of the component estimators by full enumeration."""
    from .model import _distribution

    return exact_covariance_from(_distribution(p), p, specs, n_points)


def exact_covariance_from(dist, p: IsingParams, specs, n_points: int) -> CovarianceMatrix:
    """Same as :func:`exact_covariance`, reusing a precomputed distribution."""
    specs = list(specs)
    if not specs:
        raise TraceMismatchError("need at least one estimator spec")
    if n_points < 1:
        raise ValueError(f"n_points must be >= 1, got {n_points}")
    t0, f0 = specs[0].target, specs[0].f
    if any(s.target != t0 or s.f != f0 for s in specs):
        raise TraceMismatchError("all specs must share one target region and function")
    plans = [_plan(p.graph, s, p.alphabet) for s in specs]
    joint = Region([v for pl in plans for v in pl.b_members])
    marg = dist.marginal(joint)
    pseudo = np.zeros((len(marg), p.graph.n))
    if len(joint):
        pseudo[:, joint.members] = enumerate_patterns(p.alphabet, len(joint))
    m_true = dist.expectation(f0, t0)
    f_tab = np.stack(
        [_evaluate_plan(pl, p, pseudo, memoize=False, closed_form=True) for pl in plans]
    )
    centered = f_tab - m_true
    entries = (centered * marg) @ centered.T / n_points
    return CovarianceMatrix((entries + entries.T) / 2.0, "exact")


def compose(
    traces: list[ComponentTrace],
    sigma: str = "sample",
    params: IsingParams | None = None,
) -> CompositeEstimate:
    """Fuse component traces into the composite estimate.

    ``sigma="sample"`` uses the sample covariance (the practical estimator);
    ``sigma="exact"`` needs ``params`` and enumerates the true covariance.
    Components with an empty sample region are exact already and short-circuit
    the composition; duplicate sum regions are dropped with a warning.
    """
    if sigma not in ("sample", "exact"):
        raise ValueError(f"sigma policy must be 'sample' or 'exact', got {sigma!r}")
    if not traces:
        raise TraceMismatchError("need at least one component trace")
    n = len(traces[0])
    if any(len(t) != n for t in traces):
        raise TraceMismatchError(f"traces disagree on N: {[len(t) for t in traces]}")

    seen, kept = set(), []
    for t in traces:
        key = (t.spec.target, t.spec.sum_region, t.spec.f)
        if key in seen:
            warnings.warn(
                f"duplicate sum region {t.spec.sum_region.members} dropped before composition",
                stacklevel=2,
            )
            continue
        seen.add(key)
        kept.append(t)
    traces = kept
    k = len(traces)
    components = np.array([t.mean for t in traces])
    specs = tuple(t.spec for t in traces)

    for idx, t in enumerate(traces):
        if t.boundary_empty:
            # exact component: zero variance, composition is unnecessary
            weights = np.zeros(k)
            weights[idx] = 1.0
            cov = CovarianceMatrix(np.zeros((k, k)), "exact" if sigma == "exact" else "sample")
            return CompositeEstimate(
                components, weights, float(t.mean), 0.0, cov,
                Conditioning(ridge=0.0, condition=1.0, fallback=False), specs,
            )

    if sigma == "sample":
        cov = sample_covariance(traces)
    else:
        if params is None:
            raise ValueError("sigma='exact' requires the model parameters")
        cov = exact_covariance(params, [t.spec for t in traces], n)
    weights, variance, diag = _solve_weights(cov.entries)
    value = float(weights @ components)
    return CompositeEstimate(components, weights, value, variance, cov, diag, specs)
