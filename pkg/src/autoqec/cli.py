"""Command-line front end.

Verbs: ``simulate``, ``sweep``, ``basins``, ``gap``, ``compare``.  All take a
TOML configuration (see :mod:`autoqec.config`); outputs are CSV files plus
optional SVG figures in the chosen output directory.

Exit codes: 0 success, 2 configuration error, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import os
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import analysis
from .config import (
    ConfigError,
    ExperimentConfig,
    build_initial_state,
    build_model,
    build_observables,
    load_config,
)
from .integrator import (
    NonConvergenceError,
    TimeSeries,
    liouvillian_gap,
    propagate_master,
    propagate_trajectories,
)
from .models import validate_timescales

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def _out_dir(config: ExperimentConfig, args) -> Path:
    out = args.out or config.output_dir
    if out is None:
        raise ConfigError("no output directory: set output_dir in the config or pass --out")
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _atomic_write(path: Path, write_fn) -> None:
    """Write via a temp file in the same directory, then rename into place."""
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    os.close(fd)
    try:
        write_fn(Path(tmp))
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _print_warnings(config: ExperimentConfig) -> None:
    for warning in validate_timescales(config.params):
        print(f"warning: {warning}", file=sys.stderr)


def _run_experiment(config: ExperimentConfig, threads: int = 1) -> TimeSeries:
    model = build_model(config)
    psi0 = build_initial_state(config, model)
    observables = build_observables(config, model, psi0)
    if config.trajectories is not None:
        return propagate_trajectories(
            model, psi0, config.propagation, config.trajectories, observables,
            n_workers=threads,
        )
    return propagate_master(model, psi0.density_matrix(), config.propagation, observables)


def cmd_simulate(args) -> int:
    config = load_config(args.config)
    if args.seed is not None:
        config = config.with_seed(args.seed)
    _print_warnings(config)
    out = _out_dir(config, args)
    series = _run_experiment(config, threads=args.threads)
    _atomic_write(out / "timeseries.csv", series.to_csv)
    print(f"wrote {out / 'timeseries.csv'} ({len(series.times)} samples)")
    if args.svg:
        from .plotting import save_timeseries_plot

        save_timeseries_plot(series, out / "fidelity.svg", title=config.scheme)
        print(f"wrote {out / 'fidelity.svg'}")
    return EXIT_OK


def _sweep_values(raw: str) -> list[float]:
    try:
        return [float(v) for v in raw.split(",") if v.strip() != ""]
    except ValueError as exc:
        raise ConfigError(f"cannot parse --values: {exc}") from exc


def _sweep_worker(item) -> tuple[float, TimeSeries]:
    value, config = item
    return value, _run_experiment(config)


def cmd_sweep(args) -> int:
    config = load_config(args.config)
    if args.seed is not None:
        config = config.with_seed(args.seed)
    values = _sweep_values(args.values)
    if not values:
        raise ConfigError("--values is empty")
    param = args.param
    try:
        configs = [(v, config.with_params(**{param: v})) for v in values]
    except TypeError as exc:
        raise ConfigError(f"unknown sweep parameter {param!r}: {exc}") from exc
    for _, cfg in configs:
        build_model(cfg)  # validate every sweep point before running any
    _print_warnings(config)
    out = _out_dir(config, args)

    if args.threads > 1 and len(configs) > 1:
        with ProcessPoolExecutor(max_workers=min(args.threads, len(configs))) as pool:
            runs = list(pool.map(_sweep_worker, configs))
    else:
        runs = [_sweep_worker(item) for item in configs]

    def write_combined(path: Path) -> None:
        first = runs[0][1]
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(",".join(["sweep_value"] + first.header()) + "\n")
            for value, series in runs:
                for row in series.rows():
                    fh.write(",".join(f"{x:.17g}" for x in [value] + row) + "\n")

    _atomic_write(out / "sweep.csv", write_combined)
    print(f"wrote {out / 'sweep.csv'} ({param} in {values})")
    if args.svg:
        from .plotting import save_overlay_plot

        column = next(iter(runs[0][1].observables))
        save_overlay_plot(
            [(f"{param}={v:g}", s) for v, s in runs],
            column,
            out / "sweep.svg",
            title=config.scheme,
        )
        print(f"wrote {out / 'sweep.svg'}")
    return EXIT_OK


def cmd_basins(args) -> int:
    config = load_config(args.config)
    if config.scheme not in ("effective3q", "starEffective"):
        raise ConfigError(
            f"basins needs a basis-permutation scheme (effective3q or starEffective), got {config.scheme!r}"
        )
    out = _out_dir(config, args)
    model = build_model(config)
    report = analysis.classify_basins(model)
    n_qubits = model.space.n_factors
    k_max = args.k_max if args.k_max is not None else min(3, n_qubits)
    sweep = analysis.correction_order_sweep(model, k_max)

    def bits(state: int) -> str:
        return format(state, f"0{n_qubits}b")

    def class_label(cls: analysis.AbsorbingClass) -> str:
        if cls.kind == "target-codeword":
            return "codeword0" if cls.members == (0,) else "codeword1"
        return "trapped{" + "|".join(bits(s) for s in cls.members) + "}"

    def write_csv(path: Path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("initial_pattern,weight,absorbed_class,probability\n")
            for state in range(report.n_states):
                weight = bin(state).count("1")
                for ci, cls in enumerate(report.absorbing_classes):
                    p = report.probabilities[state, ci]
                    if p > 1e-12:
                        fh.write(f"{bits(state)},{weight},{class_label(cls)},{p:.17g}\n")

    _atomic_write(out / "basins.csv", write_csv)

    lines = [
        f"scheme: {config.scheme} ({report.n_states} basis states)",
        f"absorbing classes: {len(report.absorbing_classes)}",
    ]
    for cls in report.absorbing_classes:
        lines.append(f"  {class_label(cls)} [{cls.kind}]")
    for row in sweep:
        verdict = "all corrected" if row.n_failed == 0 else f"{row.n_failed} FAILURES"
        lines.append(
            f"weight {row.weight}: {row.n_corrected}/{row.n_patterns} corrected ({verdict})"
        )
        for pattern in row.failures:
            state = report.pattern_to_state(pattern)
            prob = report.prob_correct(pattern)
            lines.append(
                f"  failure {bits(state)} (flips at {','.join(str(p + 1) for p in pattern)}):"
                f" P(correct codeword) = {prob:.6f}"
            )
    text = "\n".join(lines) + "\n"
    _atomic_write(out / "basins_report.txt", lambda p: Path(p).write_text(text, encoding="utf-8"))
    print(text, end="")
    print(f"wrote {out / 'basins.csv'} and {out / 'basins_report.txt'}")
    return EXIT_OK


def cmd_gap(args) -> int:
    config = load_config(args.config)
    model = build_model(config)
    if not model.is_time_independent:
        raise ConfigError(f"scheme {config.scheme!r} is time-dependent; gap is undefined")
    result = liouvillian_gap(model, n_eigs=args.n_eigs)
    rates = [ch.rate for ch in model.channels if ch.kind == "correction" and ch.rate > 0]
    print(f"scheme: {config.scheme}")
    print(f"stationary modes found: {result.steady_multiplicity} (within n_eigs={args.n_eigs} window)")
    print(f"spectral gap: {result.gap:.12g}")
    if rates:
        ratio = result.gap / min(rates)
        print(f"gap / min correction rate: {ratio:.12g}")
    return EXIT_OK


def cmd_compare(args) -> int:
    if len(args.configs) < 2:
        raise ConfigError("compare needs at least two configs")
    configs = [load_config(c) for c in args.configs]
    grids = [c.propagation.sample_times for c in configs]
    if any(g != grids[0] for g in grids[1:]):
        raise ConfigError("mismatched sample grids: all configs must share sample_times")
    out = Path(args.out) if args.out else None
    if out is None:
        raise ConfigError("compare needs --out")
    out.mkdir(parents=True, exist_ok=True)

    labels = [Path(c).stem for c in args.configs]
    if args.threads > 1 and len(configs) > 1:
        with ProcessPoolExecutor(max_workers=min(args.threads, len(configs))) as pool:
            results = list(pool.map(_run_experiment, configs))
    else:
        results = [_run_experiment(config) for config in configs]
    runs = list(zip(labels, results))

    column = "fidelity"
    for label, series in runs:
        if column not in series.observables:
            raise ConfigError(f"run {label!r} does not produce the {column!r} column")

    times = runs[0][1].times
    picks = np.unique(np.linspace(0, len(times) - 1, min(6, len(times))).astype(int))

    def write_table(path: Path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            header = ["time"] + [label for label, _ in runs]
            for a in range(len(runs)):
                for b in range(a + 1, len(runs)):
                    header.append(f"{runs[a][0]}-minus-{runs[b][0]}")
            fh.write(",".join(header) + "\n")
            for i in picks:
                row = [times[i]] + [s.column(column)[i] for _, s in runs]
                for a in range(len(runs)):
                    for b in range(a + 1, len(runs)):
                        row.append(runs[a][1].column(column)[i] - runs[b][1].column(column)[i])
                fh.write(",".join(f"{x:.17g}" for x in row) + "\n")

    _atomic_write(out / "compare.csv", write_table)
    print(f"wrote {out / 'compare.csv'}")
    with open(out / "compare.csv", encoding="utf-8") as fh:
        print(fh.read(), end="")
    if args.svg:
        from .plotting import save_overlay_plot

        save_overlay_plot(runs, column, out / "compare.svg")
        print(f"wrote {out / 'compare.svg'}")
    return EXIT_OK


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="autoqec",
        description="Autonomous repetition-code error correction: simulate, sweep, analyse.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config_flag=True):
        if config_flag:
            p.add_argument("--config", required=True, help="TOML experiment configuration")
        p.add_argument("--out", default=None, help="output directory (overrides config output_dir)")
        p.add_argument("--seed", type=int, default=None, help="override the trajectory RNG seed")
        p.add_argument("--threads", type=int, default=1, help="worker processes for ensembles/sweeps")
        p.add_argument("--svg", action=argparse.BooleanOptionalAction, default=True,
                       help="write SVG figures next to the CSV output")

    p = sub.add_parser("simulate", help="run one experiment, write timeseries.csv (+ SVG)")
    common(p)
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("sweep", help="repeat an experiment over one parameter, combined CSV + overlay")
    common(p)
    p.add_argument("--param", required=True, help="Params field to sweep (e.g. omega_p)")
    p.add_argument("--values", required=True, help="comma-separated parameter values")
    p.set_defaults(fn=cmd_sweep)

    p = sub.add_parser("basins", help="classify error patterns of a reduced scheme")
    common(p)
    p.add_argument("--k-max", type=int, default=None, help="largest pattern weight in the verdict table")
    p.set_defaults(fn=cmd_basins)

    p = sub.add_parser("gap", help="stationary multiplicity and spectral gap of the generator")
    common(p)
    p.add_argument("--n-eigs", type=int, default=24, help="eigenvalue window for the Krylov solver")
    p.set_defaults(fn=cmd_gap)

    p = sub.add_parser("compare", help="overlay several runs with identical sample grids")
    p.add_argument("configs", nargs="+", help="TOML configurations to compare")
    common(p, config_flag=False)
    p.set_defaults(fn=cmd_compare)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        location = ""
        config_path = getattr(args, "config", None)
        if config_path:
            location = f"{config_path}:"
            if exc.line is not None:
                location += f"{exc.line}:"
            location += " "
        print(f"{location}error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NonConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
