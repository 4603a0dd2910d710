"""Command-line front end for the experiment harness."""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import benchmarks, theory
from .harness import (ExperimentConfig, diagnose, emit_report, run_many,
                      run_once, table_preset)
from .objective import ConfigurationError
from .swarm import ComponentGaussian, StepSchedule, UniformBox

_CONFIG_KEYS = ("method", "benchmark", "dim", "particles", "lambda", "delta",
                "beta", "sigma", "schedule", "init", "batch", "runs", "seed",
                "max_iters", "stop_tol", "success_tol", "arch", "data_seed")


def _parse_schedule(text: str) -> StepSchedule:
    kind, _, rest = text.partition(":")
    try:
        vals = [float(v) for v in rest.split(",")] if rest else []
        if kind == "constant":
            return StepSchedule.constant(*vals)
        if kind == "geometric":
            return StepSchedule.geometric(*vals)
        if kind == "harmonic":
            return StepSchedule.harmonic(*vals)
    except TypeError:
        pass
    raise ConfigurationError(
        f"bad schedule {text!r}; use constant:c, geometric:c,r or harmonic:c")


def _parse_init(text: str):
    kind, _, rest = text.partition(":")
    try:
        vals = [float(v) for v in rest.split(",")]
        if kind == "uniform" and len(vals) == 2:
            return UniformBox(vals[0], vals[1])
        if kind == "gaussian" and len(vals) == 2:
            return ComponentGaussian(vals[0], vals[1])
    except ValueError:
        pass
    raise ConfigurationError(
        f"bad init {text!r}; use uniform:lo,hi or gaussian:mean,variance")


def _parse_arch(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(v) for v in text.split(","))
    except ValueError:
        raise ConfigurationError(f"bad arch {text!r}; use e.g. 5,10,1")


def _read_config_file(path: str) -> dict:
    values: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigurationError(
                    f"{path}:{lineno}: expected 'key = value'")
            key, _, value = line.partition("=")
            key = key.strip().replace("-", "_")
            if key not in _CONFIG_KEYS:
                raise ConfigurationError(
                    f"{path}:{lineno}: unknown key {key!r}")
            values[key] = value.strip()
    return values


def _coerce(values: dict) -> dict:
    out = {}
    for key, value in values.items():
        if value is None:
            continue
        if key in ("dim", "particles", "batch", "runs", "seed", "max_iters",
                   "data_seed"):
            out[key] = int(value)
        elif key in ("lambda", "delta", "beta", "sigma", "stop_tol",
                     "success_tol"):
            out[key] = float(value)
        elif key == "schedule":
            out[key] = value if isinstance(value, StepSchedule) \
                else _parse_schedule(value)
        elif key == "init":
            out[key] = value if not isinstance(value, str) else _parse_init(value)
        elif key == "arch":
            out[key] = value if isinstance(value, tuple) else _parse_arch(value)
        else:
            out[key] = value
    return out


def _build_config(args, file_values: dict | None = None) -> ExperimentConfig:
    merged = dict(file_values or {})
    for key in _CONFIG_KEYS:
        attr = "lam" if key == "lambda" else key
        val = getattr(args, attr, None)
        if val is not None:
            merged[key] = val
    merged = _coerce(merged)
    rename = {"lambda": "lam", "batch": "batch_size"}
    kwargs = {rename.get(k, k): v for k, v in merged.items()}
    return ExperimentConfig(**kwargs)


def _add_config_flags(p: argparse.ArgumentParser, with_method=True) -> None:
    if with_method:
        p.add_argument("--method", choices=("escbo", "vanilla", "fescbo"))
    p.add_argument("--benchmark")
    p.add_argument("--dim", type=int)
    p.add_argument("--particles", type=int)
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--delta", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--sigma", type=float)
    p.add_argument("--schedule")
    p.add_argument("--init")
    p.add_argument("--batch", type=int)
    p.add_argument("--runs", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--max-iters", dest="max_iters", type=int)
    p.add_argument("--stop-tol", dest="stop_tol", type=float)
    p.add_argument("--success-tol", dest="success_tol", type=float)
    p.add_argument("--arch")
    p.add_argument("--data-seed", dest="data_seed", type=int)


def _add_output_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", help="output file path")
    p.add_argument("--format", choices=("csv", "json"), default="csv")


def _print_summary(report) -> None:
    cfg = report.config
    parts = [f"method={cfg.method}", f"benchmark={cfg.benchmark}",
             f"N={cfg.particles}", f"runs={cfg.runs}"]
    if not np.isnan(report.rate):
        parts += [f"rate={report.rate:.3f}", f"sol-err={report.sol_err:.3e}",
                  f"fun-err={report.fun_err:.3e}"]
    if report.train_err is not None:
        parts += [f"train-err={report.train_err:.3e}",
                  f"test-err={report.test_err:.3e}"]
    parts += [f"mean-iters={report.mean_iters:.1f}",
              f"mean-evals={report.mean_evals:.1f}"]
    if report.n_diverged:
        parts.append(f"diverged={report.n_diverged}")
    print("  ".join(parts))


def _cmd_run(args) -> int:
    file_values = _read_config_file(args.config) if args.config else None
    config = _build_config(args, file_values)
    report = run_many(config)
    _print_summary(report)
    if args.out:
        for path in emit_report(report, args.format, args.out):
            print(f"wrote {path}")
    return 0


def _cmd_compare(args) -> int:
    reports = []
    for method in ("escbo", "vanilla"):
        args.method = method
        config = _build_config(args)
        report = run_many(config)
        _print_summary(report)
        reports.append(report)
    if args.out:
        for path in emit_report(reports, args.format, args.out):
            print(f"wrote {path}")
    return 0


def _cmd_table(name: str, args) -> int:
    reports = []
    for config in table_preset(name, args.scale):
        if args.seed is not None:
            config = ExperimentConfig(**{**config.__dict__, "seed": args.seed})
        report = run_many(config)
        _print_summary(report)
        reports.append(report)
    if args.out:
        for path in emit_report(reports, args.format, args.out):
            print(f"wrote {path}")
    return 0


def _cmd_diagnose(args) -> int:
    file_values = _read_config_file(args.config) if args.config else None
    config = _build_config(args, file_values)
    record = run_once(config, args.seed if args.seed is not None else config.seed)
    report = diagnose(record, config, L_f=args.lipschitz)
    print(f"terminated by {record.terminated_by} after {record.iterations} "
          f"iterations ({record.evals} evaluations)")
    print(report.summary())
    return 0


def _cmd_laplace(args) -> int:
    spec = benchmarks.lookup(args.benchmark, args.dim)
    gen = np.random.default_rng(args.seed if args.seed is not None else 0)
    pts = gen.uniform(spec.lo, spec.hi, size=(args.samples, spec.dim))
    f_samples = spec.objective.eval_many(pts)
    betas = [float(b) for b in args.beta_grid.split(",")]
    print("beta,laplace_value,error_budget")
    for beta in betas:
        lap = theory.laplace_value(beta, f_samples)
        budget = theory.error_budget(beta, args.eps, f_samples, spec.f_star)
        print(f"{beta!r},{lap!r},{budget!r}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="escbo",
        description="Consensus-based derivative-free optimization experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one configured campaign")
    p.add_argument("--config", help="key = value config file")
    _add_config_flags(p)
    _add_output_flags(p)
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("compare", help="escbo vs vanilla on one benchmark")
    _add_config_flags(p, with_method=False)
    _add_output_flags(p)
    p.set_defaults(func=_cmd_compare)

    for name in ("table2", "table3", "table4"):
        p = sub.add_parser(name, help=f"run the {name} preset grid")
        p.add_argument("--scale", type=float, default=0.1)
        p.add_argument("--seed", type=int)
        _add_output_flags(p)
        p.set_defaults(func=lambda a, _n=name: _cmd_table(_n, a))

    p = sub.add_parser("diagnose", help="single-run diagnostics vs bounds")
    p.add_argument("--config", help="key = value config file")
    p.add_argument("--lipschitz", type=float,
                   help="declared Lipschitz constant for the bound overlay")
    _add_config_flags(p)
    _add_output_flags(p)
    p.set_defaults(func=_cmd_diagnose)

    p = sub.add_parser("laplace", help="softmin value and error budget sweep")
    p.add_argument("--benchmark", required=True)
    p.add_argument("--dim", type=int)
    p.add_argument("--beta-grid", dest="beta_grid", required=True,
                   help="comma-separated beta values")
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--eps", type=float, default=0.5)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=_cmd_laplace)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigurationError, theory.InvalidParametersError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
