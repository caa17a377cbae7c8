"""Configuration-driven experiment protocols with trial averaging.

Three kinds of runs, mirroring the figure protocols:

* ``expectation``: per-vertex mean estimation MAE, swept over 1/T, N, and the
  MCMC interval r; every method reads the same sample set within a trial.
* ``covariance``: element-wise L1 error of the sample covariance against the
  enumerated one, swept over N for a growing template ladder K.
* ``learning``: parameter MAE per epoch against the exact-ML reference for
  each moment-estimation policy.

Reports aggregate per (setting, method) over trials and serialize to a
deterministic CSV: ``setting,method,mean_mae,stderr,trials``.
"""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from . import __version__
from .errors import EnumerationLimitError, ExperimentConfigError
from .estimators import smci_estimate, template_spec
from .gls import compose, exact_covariance_from, sample_covariance
from .graphs import Graph, Region, parse_graph_spec
from .kernels import BACKEND
from .learning import Dataset, TrainConfig, exact_ml, train
from .model import (
    ENUMERATION_CAP_STATES,
    IsingParams,
    _distribution,
    random_params,
    state_space,
)
from .sampling import as_generator, draw_sample_set

__all__ = [
    "ESTIMATION_METHODS",
    "LEARNING_POLICIES",
    "PRESETS",
    "ExperimentConfig",
    "ExperimentReport",
    "expectation_mae",
    "covariance_mae",
    "fit_loglog_slope",
    "run_experiment",
    "preset",
    "load_config",
]

ESTIMATION_METHODS = ("mci", "smci-I", "smci-II", "smci-III", "qcsmci-I+II", "qcsmci-all")
LEARNING_POLICIES = ("exact", "mci", "smci-I", "smci-II", "smci-III", "qcsmci-I+II", "qcsmci-all")
_KINDS = ("expectation", "covariance", "learning")
_LADDER = ("I", "II", "III", "IV", "V", "VI", "VII")


@dataclass
class ExperimentConfig:
    kind: str = "expectation"
    graph: str = "torus:4x5"
    inv_temps: tuple = (0.3,)
    n_samples: tuple = (100,)
    mcmc_r: tuple = (50,)
    k_ladder: tuple = (2, 3, 4, 5, 6, 7)
    methods: tuple = ("smci-I", "smci-II", "smci-III", "qcsmci-I+II", "qcsmci-all")
    trials: int = 10
    seed: int = 0
    epochs: int = 100
    eta: float = 0.02
    kappa: int = 1
    data_m: int = 1000
    data_r: int = 50
    zero_field: bool = False
    label: str = ""

    def validate(self) -> None:
        if self.kind not in _KINDS:
            raise ExperimentConfigError(f"unknown experiment kind {self.kind!r}")
        if self.trials < 1:
            raise ExperimentConfigError(f"trials must be >= 1, got {self.trials}")
        for name in ("inv_temps", "n_samples", "mcmc_r"):
            if not getattr(self, name):
                raise ExperimentConfigError(f"{name} sweep must not be empty")
        if any(t <= 0 for t in self.inv_temps):
            raise ExperimentConfigError("inverse temperatures must be positive")
        if any(n < 1 for n in self.n_samples) or any(r < 0 for r in self.mcmc_r):
            raise ExperimentConfigError("n_samples must be >= 1 and mcmc_r >= 0")
        if self.kind == "covariance":
            if not self.k_ladder or any(not 1 <= k <= len(_LADDER) for k in self.k_ladder):
                raise ExperimentConfigError(f"k_ladder entries must lie in 1..{len(_LADDER)}")
        allowed = LEARNING_POLICIES if self.kind == "learning" else ESTIMATION_METHODS
        if self.kind != "covariance":
            bad = [m for m in self.methods if m not in allowed]
            if bad:
                raise ExperimentConfigError(f"unknown methods {bad}; choose from {allowed}")
        try:
            parse_graph_spec(self.graph)
        except Exception as exc:
            raise ExperimentConfigError(f"bad graph spec {self.graph!r}: {exc}") from None


@dataclass
class ExperimentReport:
    rows: list
    metadata: dict

    def to_csv(self) -> str:
        lines = ["setting,method,mean_mae,stderr,trials"]
        for setting, method, mean, stderr, trials in self.rows:
            lines.append(f"{setting},{method},{mean:.12g},{stderr:.12g},{trials}")
        return "\n".join(lines) + "\n"

    def save(self, path) -> None:
        Path(path).write_bytes(self.to_csv().encode("utf-8"))


# ---------------------------------------------------------------------------
# Error measures
# ---------------------------------------------------------------------------


def expectation_mae(p: IsingParams, estimates) -> float:
    """Mean absolute error of per-vertex mean estimates against ground truth.

    Zero-field symmetric models have exactly zero means, which sidesteps the
    enumeration cap on large graphs.
    """
    estimates = np.asarray(estimates, dtype=np.float64)
    if estimates.shape != (p.graph.n,):
        raise ValueError(f"estimates must have shape ({p.graph.n},), got {estimates.shape}")
    if np.all(p.h == 0.0) and p.alphabet == (-1.0, 1.0):
        exact = np.zeros(p.graph.n)
    else:
        if len(p.alphabet) ** p.graph.n > ENUMERATION_CAP_STATES:
            raise EnumerationLimitError(
                "exact means need enumeration (or a zero-field symmetric model)"
            )
        exact = _distribution(p).vertex_means()
    return float(np.abs(exact - estimates).mean())


def covariance_mae(exact_mats, approx_mats) -> float:
    """Average element-wise L1 distance per matrix entry across vertices."""
    if len(exact_mats) != len(approx_mats):
        raise ValueError(f"matrix lists differ in length: {len(exact_mats)} vs {len(approx_mats)}")
    total = 0.0
    for a, b in zip(exact_mats, approx_mats):
        a = np.asarray(a, dtype=np.float64)
        b = np.asarray(b, dtype=np.float64)
        if a.shape != b.shape or a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f"matrix shapes mismatch: {a.shape} vs {b.shape}")
        total += np.abs(a - b).sum() / a.shape[0] ** 2
    return total / len(exact_mats)


def fit_loglog_slope(points) -> float:
    """Least-squares slope of log(mae) against log(N)."""
    pts = [(float(n), float(m)) for n, m in points]
    if len(pts) < 3:
        raise ValueError(f"need at least 3 points for a slope, got {len(pts)}")
    if any(n <= 0 or m <= 0 for n, m in pts):
        raise ValueError("all points must be positive for a log-log fit")
    xs = np.log([n for n, _ in pts])
    ys = np.log([m for _, m in pts])
    return float(np.polyfit(xs, ys, 1)[0])


# ---------------------------------------------------------------------------
# Runners
# ---------------------------------------------------------------------------


def _trial_seed(master: int, *key: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(entropy=int(master), spawn_key=tuple(int(k) for k in key))


def _vertex_templates(g: Graph, kinds) -> dict:
    return {
        k: [template_spec(g, Region([v]), k) for v in g.vertices]
        for k in kinds
    }


def _aggregate(per_trial: dict, trials: int) -> list:
    rows = []
    for (setting, method), vals in per_trial.items():
        arr = np.asarray(vals)
        stderr = float(arr.std(ddof=1) / np.sqrt(len(arr))) if len(arr) > 1 else 0.0
        rows.append((setting, method, float(arr.mean()), stderr, trials))
    return rows


def _method_estimates(method: str, params, samples, traces_by_kind, v_count: int) -> np.ndarray:
    if method == "mci":
        return samples.points.mean(axis=0)
    if method.startswith("smci-"):
        kind = method.split("-", 1)[1]
        return np.array([traces_by_kind[kind][v].mean for v in range(v_count)])
    kinds = ("I", "II") if method == "qcsmci-I+II" else ("I", "II", "III")
    return np.array(
        [compose([traces_by_kind[k][v] for k in kinds], sigma="sample").value for v in range(v_count)]
    )


def _run_expectation(cfg: ExperimentConfig, g: Graph) -> list:
    needed: set = set()
    for m in cfg.methods:
        if m.startswith("smci-"):
            needed.add(m.split("-", 1)[1])
        elif m == "qcsmci-I+II":
            needed.update(("I", "II"))
        elif m == "qcsmci-all":
            needed.update(("I", "II", "III"))
    specs = _vertex_templates(g, sorted(needed)) if needed else {}
    settings = [
        (it, n, r) for it in cfg.inv_temps for n in cfg.n_samples for r in cfg.mcmc_r
    ]
    per_trial: dict = {}
    for s_idx, (invt, n_pts, r) in enumerate(settings):
        label = f"1/T={invt:g}|N={n_pts}|r={r}"
        for trial in range(cfg.trials):
            model_rng, samp_rng = _trial_seed(cfg.seed, trial, s_idx).spawn(2)
            params = random_params(g, invt, seed=model_rng, zero_field=cfg.zero_field)
            samples = draw_sample_set(params, n_pts, r, as_generator(samp_rng))
            traces = {
                kind: [smci_estimate(params, spec, samples) for spec in spec_list]
                for kind, spec_list in specs.items()
            }
            for method in cfg.methods:
                est = _method_estimates(method, params, samples, traces, g.n)
                mae = expectation_mae(params, est)
                per_trial.setdefault((label, method), []).append(mae)
    return _aggregate(per_trial, cfg.trials)


def _run_covariance(cfg: ExperimentConfig, g: Graph) -> list:
    k_max = max(cfg.k_ladder)
    ladder = _LADDER[:k_max]
    specs = _vertex_templates(g, ladder)
    space = state_space(g)
    per_trial: dict = {}
    settings = [(it, n) for it in cfg.inv_temps for n in cfg.n_samples]
    r = cfg.mcmc_r[0]
    for s_idx, (invt, n_pts) in enumerate(settings):
        label = f"1/T={invt:g}|N={n_pts}"
        for trial in range(cfg.trials):
            model_rng, samp_rng = _trial_seed(cfg.seed, trial, s_idx).spawn(2)
            params = random_params(g, invt, seed=model_rng)
            samples = draw_sample_set(params, n_pts, r, as_generator(samp_rng))
            dist = space.distribution(params.h, params.J)
            exact_full, sample_full = [], []
            for v in g.vertices:
                vertex_specs = [specs[k][v] for k in ladder]
                traces = [smci_estimate(params, sp, samples) for sp in vertex_specs]
                sample_full.append(sample_covariance(traces).entries)
                exact_full.append(
                    exact_covariance_from(dist, params, vertex_specs, n_pts).entries
                )
            for k in cfg.k_ladder:
                mae = covariance_mae(
                    [m[:k, :k] for m in exact_full], [m[:k, :k] for m in sample_full]
                )
                per_trial.setdefault((label, f"K={k}"), []).append(mae)
    return _aggregate(per_trial, cfg.trials)


def _run_learning(cfg: ExperimentConfig, g: Graph) -> list:
    invt = cfg.inv_temps[0]
    n_chains = cfg.n_samples[0]
    exact_ref = 2**g.n <= ENUMERATION_CAP_STATES and not cfg.zero_field
    per_trial: dict = {}
    for trial in range(cfg.trials):
        gen_rng, data_rng = _trial_seed(cfg.seed, trial, 0).spawn(2)
        gen_params = random_params(g, invt, seed=gen_rng, zero_field=cfg.zero_field)
        data = Dataset.from_samples(
            g, draw_sample_set(gen_params, cfg.data_m, cfg.data_r, as_generator(data_rng))
        )
        trajectories = {}
        for m_idx, policy in enumerate(cfg.methods):
            seed = int(_trial_seed(cfg.seed, trial, 1 + m_idx).generate_state(1, np.uint64)[0])
            tc = TrainConfig(
                policy=policy, eta=cfg.eta, epochs=cfg.epochs, n_chains=n_chains,
                kappa=cfg.kappa, seed=seed, learn_fields=not cfg.zero_field,
            )
            trajectories[policy] = train(g, data, tc)
        if exact_ref:
            warm = trajectories[cfg.methods[0]].final_params
            reference = exact_ml(g, data, eta=0.7, max_iter=2000, init=warm)
        else:
            reference = gen_params  # surrogate reference: generative parameters
        for policy, traj in trajectories.items():
            h_maes, j_maes = traj.mae_against(reference)
            for epoch in range(len(traj)):
                per_trial.setdefault((f"epoch={epoch}", f"{policy}:h"), []).append(h_maes[epoch])
                per_trial.setdefault((f"epoch={epoch}", f"{policy}:J"), []).append(j_maes[epoch])
    return _aggregate(per_trial, cfg.trials)


def run_experiment(cfg: ExperimentConfig) -> ExperimentReport:
    """Run all trials of a configured experiment; deterministic per (cfg, seed)."""
    cfg.validate()
    g = parse_graph_spec(cfg.graph)
    start = time.perf_counter()
    if cfg.kind == "expectation":
        rows = _run_expectation(cfg, g)
    elif cfg.kind == "covariance":
        rows = _run_covariance(cfg, g)
    else:
        rows = _run_learning(cfg, g)
    meta = {
        "config": asdict(cfg),
        "wall_time_s": round(time.perf_counter() - start, 3),
        "version": __version__,
        "kernel_backend": BACKEND,
    }
    if cfg.kind == "learning":
        exact_ref = 2**g.n <= ENUMERATION_CAP_STATES and not cfg.zero_field
        meta["reference"] = "exact-ml" if exact_ref else "generative"
    return ExperimentReport(rows, meta)


# ---------------------------------------------------------------------------
# Presets and config files
# ---------------------------------------------------------------------------


def preset(name: str, paper_scale: bool = False, seed: int = 0) -> ExperimentConfig:
    """Named figure protocols; CI-sized trial counts unless paper_scale is set."""
    invt_sweep = tuple(round(0.05 * k, 2) for k in range(1, 13))
    methods5 = ("smci-I", "smci-II", "smci-III", "qcsmci-I+II", "qcsmci-all")
    if name == "fig3":
        return ExperimentConfig(
            kind="expectation", graph="torus:4x5", inv_temps=invt_sweep,
            n_samples=(100, 10000), mcmc_r=(50,), methods=methods5,
            trials=1000 if paper_scale else 10, seed=seed, label=name,
        )
    if name == "fig4":
        return ExperimentConfig(
            kind="expectation", graph="torus:4x5", inv_temps=(0.05, 0.3),
            n_samples=(10, 100, 1000, 10000), mcmc_r=(50,), methods=methods5,
            trials=1000 if paper_scale else 10, seed=seed, label=name,
        )
    if name == "fig6":
        return ExperimentConfig(
            kind="covariance", graph="torus:4x5", inv_temps=(0.05, 0.3),
            n_samples=(100, 1000, 10000), mcmc_r=(50,), k_ladder=(2, 3, 4, 5, 6, 7),
            trials=100 if paper_scale else 5, seed=seed, label=name,
        )
    if name in ("fig8", "fig9"):
        return ExperimentConfig(
            kind="learning", graph="torus:4x5",
            inv_temps=(0.05,) if name == "fig8" else (0.3,),
            n_samples=(1000,), mcmc_r=(50,), methods=methods5,
            trials=500 if paper_scale else 2, seed=seed,
            epochs=100, eta=0.02, kappa=1, data_m=1000, data_r=50, label=name,
        )
    raise ExperimentConfigError(f"unknown preset {name!r}; choose fig3, fig4, fig6, fig8, or fig9")


PRESETS = ("fig3", "fig4", "fig6", "fig8", "fig9")

_TUPLE_FIELDS_INT = {"n_samples", "mcmc_r", "k_ladder"}
_TUPLE_FIELDS_FLOAT = {"inv_temps"}
_TUPLE_FIELDS_STR = {"methods"}


def load_config(path) -> ExperimentConfig:
    """Parse a ``key = value`` config file mirroring ExperimentConfig fields."""
    known = {f.name: f for f in fields(ExperimentConfig)}
    kwargs: dict = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ExperimentConfigError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key not in known:
            raise ExperimentConfigError(f"{path}:{lineno}: unknown key {key!r}")
        if key in _TUPLE_FIELDS_INT:
            kwargs[key] = tuple(int(v) for v in value.split(","))
        elif key in _TUPLE_FIELDS_FLOAT:
            kwargs[key] = tuple(float(v) for v in value.split(","))
        elif key in _TUPLE_FIELDS_STR:
            kwargs[key] = tuple(v.strip() for v in value.split(","))
        elif known[key].type in ("int", int):
            kwargs[key] = int(value)
        elif known[key].type in ("float", float):
            kwargs[key] = float(value)
        elif known[key].type in ("bool", bool):
            kwargs[key] = value.lower() in ("1", "true", "yes")
        else:
            kwargs[key] = value
    cfg = ExperimentConfig(**kwargs)
    cfg.validate()
    return cfg
