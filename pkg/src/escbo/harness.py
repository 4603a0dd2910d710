"""Seeded experiment campaigns: run steppers, score runs, emit reports.

A campaign is fully determined by its ExperimentConfig, including every
random draw: run i uses seed ``config.seed + i``.  Re-running the same
config therefore reproduces report files byte for byte.
"""

from __future__ import annotations

import json
import math
import os
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import benchmarks, neural, theory
from .objective import ConfigurationError, FiniteDiffConfig, gradient_bounds
from .swarm import (CBOParams, ComponentGaussian, DivergenceError, RngStream,
                    StepSchedule, SwarmState, UniformBox, check_stop,
                    consensus_point, escbo_step, fescbo_step, init_swarm,
                    refresh_values, swarm_diameter, vanilla_cbo_step)

__all__ = [
    "AggregateReport",
    "DiagnosticReport",
    "ExperimentConfig",
    "RunRecord",
    "diagnose",
    "emit_report",
    "run_many",
    "run_once",
    "table_preset",
]

METHODS = ("escbo", "vanilla", "fescbo")

# Series checkpoints: every iteration early on, every 10th afterwards.
CHECKPOINT_DENSE_UNTIL = 100
CHECKPOINT_STRIDE = 10

SUMMARY_COLUMNS = ("method", "benchmark", "d", "N", "init", "rate",
                   "sol_err", "fun_err", "mean_iters", "mean_evals")
SERIES_COLUMNS = ("run", "k", "diameter", "w_k", "best_f")


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything needed to reproduce a campaign.

    ``benchmark`` names a registered objective, or "dnn" with ``arch`` set to
    the layer widths.  ``init`` defaults to the uniform distribution on the
    benchmark's default box.
    """

    method: str = "escbo"
    benchmark: str = "rastrigin"
    dim: int = 2
    particles: int = 20
    lam: float = 0.01
    delta: float = 0.1
    beta: float = 1e20
    sigma: float = 1e-5
    schedule: StepSchedule = field(
        default_factory=lambda: StepSchedule.geometric(1.0, 0.99))
    init: Optional[object] = None
    batch_size: Optional[int] = None
    max_iters: int = 10_000
    stop_tol: float = 1e-6
    success_tol: float = 1e-3
    runs: int = 100
    seed: int = 0
    arch: Optional[tuple[int, ...]] = None
    data_seed: int = 0

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigurationError(
                f"method must be one of {METHODS}, got {self.method!r}")
        if self.method == "fescbo" and not self.batch_size:
            raise ConfigurationError("fescbo needs batch_size")
        if self.benchmark == "dnn" and self.arch is None:
            raise ConfigurationError("dnn target needs arch widths")
        if self.max_iters < 0 or self.runs < 0:
            raise ConfigurationError("max_iters and runs must be >= 0")

    @property
    def params(self) -> CBOParams:
        return CBOParams(lam=self.lam, delta=self.delta, beta=self.beta,
                         fd=FiniteDiffConfig(self.sigma))


@dataclass(eq=False)
class _Target:
    objective: object
    dim: int
    x_star: Optional[np.ndarray]      # (n_minimizers, dim) or None
    f_star: Optional[float]
    init: object
    arch: Optional[neural.MLPArchitecture] = None
    data: Optional[neural.SyntheticDataset] = None


def _build_target(config: ExperimentConfig) -> _Target:
    if config.benchmark == "dnn":
        arch = neural.MLPArchitecture(tuple(config.arch))
        data = neural.generate_synthetic(arch, config.data_seed)
        init = config.init if config.init is not None else UniformBox(-3.0, 3.0)
        return _Target(objective=neural.dnn_objective(arch, data),
                       dim=arch.dim, x_star=None, f_star=None, init=init,
                       arch=arch, data=data)
    spec = benchmarks.lookup(config.benchmark, config.dim)
    init = config.init if config.init is not None else UniformBox(*spec.default_box)
    return _Target(objective=spec.objective, dim=spec.dim, x_star=spec.x_star,
                   f_star=spec.f_star, init=init)


@dataclass(eq=False)
class RunRecord:
    """Per-run trajectory diagnostics and the terminal swarm.

    For training targets, ``train_err`` and ``test_err`` are evaluated at the
    best terminal particle and ``init_train_err`` is the swarm's mean
    objective value at k = 0 (the expected error of a random initialization).
    """

    seed: int
    iterations: int
    terminated_by: str  # stop_rule | max_iters | divergence
    final_positions: np.ndarray
    final_values: np.ndarray
    ks: np.ndarray
    diameter: np.ndarray
    w_k: Optional[np.ndarray]
    best_f: np.ndarray
    consensus: np.ndarray
    evals: int
    train_err: Optional[float] = None
    test_err: Optional[float] = None
    init_train_err: Optional[float] = None


def _is_checkpoint(k: int) -> bool:
    return k <= CHECKPOINT_DENSE_UNTIL or k % CHECKPOINT_STRIDE == 0


def _w_value(positions: np.ndarray, x_star: Optional[np.ndarray]) -> float:
    if x_star is None:
        return math.nan
    # With several minimizers, measure against the best-matching one.
    best = math.inf
    for xs in x_star:
        diff = positions - xs
        best = min(best, float(np.mean(np.einsum("ij,ij->i", diff, diff))))
    return best


def run_once(config: ExperimentConfig, seed: int) -> RunRecord:
    """One seeded trajectory of the configured stepper.

    Runs until the stopping rule fires, max_iters is reached, or a particle
    diverges; divergence is recorded (with the last finite state) rather than
    raised.
    """
    target = _build_target(config)
    obj = target.objective
    obj.reset_count()
    params = config.params
    rng = RngStream(seed)
    state = refresh_values(
        init_swarm(target.init, config.particles, target.dim, rng), obj)
    init_mean_f = float(state.values.mean())

    ks, diam, wks, best, cons = [], [], [], [], []

    def record(st: SwarmState) -> None:
        ks.append(st.k)
        diam.append(swarm_diameter(st.positions))
        wks.append(_w_value(st.positions, target.x_star))
        best.append(float(st.values.min()))
        cons.append(consensus_point(st, params.beta).xbar)

    record(state)
    terminated_by = "max_iters"
    while state.k < config.max_iters:
        prev = state
        try:
            if config.method == "escbo":
                state = escbo_step(state, obj, params, config.schedule, rng)
            elif config.method == "vanilla":
                state = vanilla_cbo_step(state, obj, params, rng)
            else:
                state = fescbo_step(state, obj, params, config.schedule,
                                    config.batch_size, rng)
        except DivergenceError:
            state = prev
            terminated_by = "divergence"
            break
        if _is_checkpoint(state.k):
            record(state)
        if check_stop(prev, state, config.stop_tol):
            terminated_by = "stop_rule"
            break
    if ks[-1] != state.k:
        record(state)

    rec = RunRecord(
        seed=seed, iterations=state.k, terminated_by=terminated_by,
        final_positions=state.positions, final_values=state.values,
        ks=np.array(ks), diameter=np.array(diam),
        w_k=None if target.x_star is None else np.array(wks),
        best_f=np.array(best), consensus=np.array(cons),
        evals=obj.eval_count)
    if target.data is not None:
        best_idx = int(np.argmin(state.values))
        best_params = state.positions[best_idx]
        rec.train_err = float(state.values[best_idx])
        rec.test_err = neural.test_error(target.arch, best_params, target.data)
        rec.init_train_err = init_mean_f
    return rec


def _success_distance(positions: np.ndarray, x_star: np.ndarray) -> float:
    """min over listed minimizers of max_i ||x_i - x*||."""
    best = math.inf
    for xs in x_star:
        dist = np.linalg.norm(positions - xs, axis=1).max()
        best = min(best, float(dist))
    return best


@dataclass(eq=False)
class AggregateReport:
    """Campaign-level statistics over independent seeded runs."""

    config: ExperimentConfig
    records: list[RunRecord]
    rate: float
    sol_err: float
    fun_err: float
    mean_iters: float
    mean_evals: float
    n_diverged: int
    train_err: Optional[float] = None
    test_err: Optional[float] = None

    @classmethod
    def from_records(cls, config: ExperimentConfig,
                     records: list[RunRecord]) -> "AggregateReport":
        if not records:
            return cls(config=config, records=[], rate=math.nan,
                       sol_err=math.nan, fun_err=math.nan,
                       mean_iters=math.nan, mean_evals=math.nan, n_diverged=0)
        target = _build_target(config)
        successes, sol, fun = [], [], []
        for rec in records:
            if target.x_star is not None:
                hit = (_success_distance(rec.final_positions, target.x_star)
                       < config.success_tol)
                successes.append(hit and rec.terminated_by != "divergence")
                sol.append(_w_value(rec.final_positions, target.x_star))
                fun.append(float(np.mean(
                    np.abs(rec.final_values - target.f_star))))
        report = cls(
            config=config, records=records,
            rate=float(np.mean(successes)) if successes else math.nan,
            sol_err=float(np.mean(sol)) if sol else math.nan,
            fun_err=float(np.mean(fun)) if fun else math.nan,
            mean_iters=float(np.mean([r.iterations for r in records])),
            mean_evals=float(np.mean([r.evals for r in records])),
            n_diverged=sum(r.terminated_by == "divergence" for r in records))
        if records[0].train_err is not None:
            report.train_err = float(np.mean([r.train_err for r in records]))
            report.test_err = float(np.mean([r.test_err for r in records]))
        return report


def run_many(config: ExperimentConfig) -> AggregateReport:
    """Independent seeded runs aggregated into success and error statistics.

    Runs are a pure function of (config, seed) and share no state, so they
    could execute concurrently; aggregation is ordered by run index either
    way.
    """
    if config.runs < 1:
        raise ConfigurationError("runs must be >= 1")
    records = [run_once(config, config.seed + i) for i in range(config.runs)]
    return AggregateReport.from_records(config, records)


# Benchmark rows of the two comparison tables: (name, dimension).
_TABLE2_ROWS = [("rastrigin", 3), ("rastrigin", 10), ("salomon", 3),
                ("salomon", 10), ("griewank", 3), ("griewank", 10),
                ("ackley", 3), ("xinsheyang4", 3), ("bartels_conn", 2),
                ("schaffer4", 2)]
_TABLE3_ROWS = [("rastrigin", 2), ("salomon", 2), ("griewank", 2),
                ("ackley", 2), ("xinsheyang4", 2), ("bartels_conn", 2),
                ("schaffer4", 2)]
_TABLE4_ARCHS = [(5, 10, 1), (5, 5, 5, 5, 1), (5, 10, 10, 10, 1),
                 (10, 10, 1), (10, 5, 5, 5, 1), (10, 10, 10, 10, 1)]


def table_preset(name: str, scale: float = 1.0) -> list[ExperimentConfig]:
    """Config grids for the three comparison tables.

    ``scale`` in (0, 1] shrinks the run count and iteration cap so a full
    grid finishes in minutes instead of hours.
    """
    if not 0 < scale <= 1:
        raise ConfigurationError(f"scale must lie in (0, 1], got {scale}")
    runs = max(1, round(100 * scale))
    max_iters = max(1, round(10_000 * scale))
    shared = dict(lam=0.01, delta=0.1, beta=1e20, sigma=1e-5,
                  schedule=StepSchedule.geometric(1.0, 0.99),
                  runs=runs, max_iters=max_iters)
    configs: list[ExperimentConfig] = []
    if name == "table2":
        for bench, d in _TABLE2_ROWS:
            for mult in (20, 40, 60):
                for method in ("escbo", "vanilla"):
                    configs.append(ExperimentConfig(
                        method=method, benchmark=bench, dim=d,
                        particles=mult * d, init=UniformBox(-5.0, 5.0),
                        **shared))
    elif name == "table3":
        inits = [UniformBox(-3.0, 3.0), UniformBox(2.0, 6.0),
                 ComponentGaussian(0.0, 3.0)]
        for bench, d in _TABLE3_ROWS:
            for init in inits:
                for method in ("escbo", "vanilla"):
                    configs.append(ExperimentConfig(
                        method=method, benchmark=bench, dim=d, particles=120,
                        init=init, **shared))
    elif name == "table4":
        for arch in _TABLE4_ARCHS:
            configs.append(ExperimentConfig(
                method="fescbo", benchmark="dnn", dim=0, arch=arch,
                particles=100, lam=1.0, delta=1.0, beta=1e20, sigma=0.001,
                batch_size=10, schedule=StepSchedule.geometric(1.0, 0.99),
                init=UniformBox(-3.0, 3.0), runs=runs, max_iters=max_iters))
    else:
        raise ConfigurationError(
            f"unknown preset {name!r}; choose table2, table3 or table4")
    return configs


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return "" if math.isnan(v) else repr(v)
    return str(v)


def _summary_row(report: AggregateReport) -> dict:
    cfg = report.config
    target_name = cfg.benchmark if cfg.arch is None \
        else f"dnn({'-'.join(str(w) for w in cfg.arch)})"
    dim = cfg.dim if cfg.arch is None \
        else neural.MLPArchitecture(tuple(cfg.arch)).dim
    init = cfg.init if cfg.init is not None else "default"
    row = {
        "method": cfg.method, "benchmark": target_name, "d": dim,
        "N": cfg.particles, "init": str(init),
        "rate": None if math.isnan(report.rate) else report.rate,
        "sol_err": None if math.isnan(report.sol_err) else report.sol_err,
        "fun_err": None if math.isnan(report.fun_err) else report.fun_err,
        "mean_iters": report.mean_iters, "mean_evals": report.mean_evals,
    }
    if report.train_err is not None:
        row["train_err"] = report.train_err
        row["test_err"] = report.test_err
    return row


def _series_rows(report: AggregateReport):
    for i, rec in enumerate(report.records):
        w = rec.w_k
        for j, k in enumerate(rec.ks):
            yield {"run": i, "k": int(k),
                   "diameter": float(rec.diameter[j]),
                   "w_k": None if w is None else float(w[j]),
                   "best_f": float(rec.best_f[j])}


def emit_report(reports, fmt: str, path) -> list[str]:
    """Write campaign summaries and long-format series deterministically.

    ``reports`` is one AggregateReport or a list of them.  csv writes the
    summary at ``path`` and the series beside it with a ``_series`` suffix;
    json writes a single document holding both.  Returns the written paths.
    """
    if isinstance(reports, AggregateReport):
        reports = [reports]
    reports = [r for r in reports if r.records]
    rows = [_summary_row(r) for r in reports]
    series = [row for r in reports for row in _series_rows(r)]
    path = os.fspath(path)
    if fmt == "json":
        doc = {"summary": rows, "series": series}
        with open(path, "w", encoding="ascii", newline="\n") as fh:
            json.dump(doc, fh, indent=1)
            fh.write("\n")
        return [path]
    if fmt != "csv":
        raise ConfigurationError(f"format must be csv or json, got {fmt!r}")
    base, ext = os.path.splitext(path)
    series_path = f"{base}_series{ext or '.csv'}"
    extra = ("train_err", "test_err") if any("train_err" in r for r in rows) \
        else ()
    columns = SUMMARY_COLUMNS + extra
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(row.get(c)) for c in columns) + "\n")
    with open(series_path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(",".join(SERIES_COLUMNS) + "\n")
        for row in series:
            fh.write(",".join(_fmt(row[c]) for c in SERIES_COLUMNS) + "\n")
    return [path, series_path]


@dataclass(eq=False)
class DiagnosticReport:
    """Empirical trajectory statistics set against the computable bounds."""

    condition: theory.ConsensusCondition
    ks: np.ndarray
    diameter: np.ndarray
    diameter_bound: Optional[np.ndarray]
    decay_slope: Optional[float]
    w_k: Optional[np.ndarray] = None
    w_bound: Optional[np.ndarray] = None
    notes: list[str] = field(default_factory=list)

    def summary(self) -> str:
        lines = [
            f"contraction value (1-lam)^2+delta^2 = {self.condition.value:.6g}"
            f" ({'ok' if self.condition.satisfied else 'violated'})",
            f"step schedule summable: {self.condition.schedule_summable}",
        ]
        if self.decay_slope is not None:
            lines.append(f"log-diameter decay slope: {self.decay_slope:.4f}"
                         " per iteration")
        if self.diameter_bound is not None:
            within = np.all(self.diameter
                            <= self.diameter_bound[:len(self.diameter)])
            lines.append(f"diameter under theoretical bound: {bool(within)}")
        if self.w_bound is not None:
            within = np.all(self.w_k <= self.w_bound)
            lines.append(f"mean sq. distance under gamma^k bound: {bool(within)}")
        lines.extend(self.notes)
        return "\n".join(lines)


def diagnose(record: RunRecord, config: ExperimentConfig,
             L_f: Optional[float] = None, var_init: Optional[float] = None,
             xi: float = 0.5) -> DiagnosticReport:
    """Overlay a run's diameter and distance series with the computed bounds.

    ``L_f`` enables the contraction-bound overlay (via the estimator bounds);
    ``var_init`` defaults to half the observed initial diameter.
    """
    notes: list[str] = []
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", theory.ParameterConditionWarning)
        condition = theory.check_consensus_condition(
            config.lam, config.delta, config.schedule)
    notes.extend(str(w.message) for w in caught)

    bound = None
    if L_f is not None:
        target = _build_target(config)
        lb = gradient_bounds(L_f, target.dim, config.sigma)
        if var_init is None:
            var_init = float(record.diameter[0]) / 2.0
        k_max = int(record.ks.max())
        full = theory.consensus_bound_series(
            k_max, config.lam, config.delta, config.schedule, lb.L_g, var_init)
        bound = full[record.ks]

    slope = None
    positive = record.diameter > 0
    if np.count_nonzero(positive) >= 2:
        slope = float(np.polyfit(record.ks[positive],
                                 np.log(record.diameter[positive]), 1)[0])

    w_bound = None
    if record.w_k is not None:
        try:
            constants = theory.contraction_constants(config.lam, config.delta,
                                                     xi=xi)
            w_bound = record.w_k[0] * constants.gamma ** record.ks.astype(float)
        except theory.InvalidParametersError as exc:
            notes.append(f"gamma^k overlay unavailable: {exc}")
    return DiagnosticReport(condition=condition, ks=record.ks,
                            diameter=record.diameter, diameter_bound=bound,
                            decay_slope=slope, w_k=record.w_k,
                            w_bound=w_bound, notes=notes)
