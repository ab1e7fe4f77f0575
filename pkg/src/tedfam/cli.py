"""Batch command-line interface.

Exit codes: 0 success, 2 I/O or parse failure, 3 invalid arguments or
dimensions, 4 numerical failure.  Set ``TEDFAM_NUM_THREADS`` to cap the
BLAS thread pool.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .baseline import bilinear_signal
from .core import MatrixSeries, NumericalError, ValidationError
from .estimator import default_k_max, estimate_rank, fit, spectra
from .io import (
    ParseError,
    ensure_dir,
    file_digest,
    format_number,
    read_matrix_csv,
    read_series,
    write_blocks_csv,
    write_manifest,
    write_matrix_csv,
    write_series,
)
from .metrics import (
    correlation_distance,
    correlation_matrix,
    psnr_series,
    rmse_signal,
    space_distance,
    varimax,
)
from .simulate import Scenario, ScenarioConfig, generate_scenario

EXIT_OK = 0
EXIT_IO = 2
EXIT_VALIDATION = 3
EXIT_NUMERICAL = 4

ALL_METRICS = ("dist", "rmse_signal", "rmse_x", "psnr", "corr_row", "corr_column", "corr_vectorized")
THREADS_ENV = "TEDFAM_NUM_THREADS"


class UsageError(ValidationError):
    pass


def _rank_arg(value: str):
    if value == "auto":
        return value
    try:
        k = int(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a positive integer or 'auto', got {value!r}") from None
    return k


def _named(value: str) -> tuple[str, str]:
    name, sep, path = value.partition("=")
    if not sep or not name or not path:
        raise argparse.ArgumentTypeError(f"expected NAME=PATH, got {value!r}")
    return name, path


def _manifest(args, command: str, inputs: dict[str, str], **extra) -> dict:
    entries = {"command": command, "version": __version__}
    for key, value in sorted(vars(args).items()):
        if key in ("func", "out_dir"):
            continue
        if isinstance(value, list):
            value = ";".join("=".join(v) if isinstance(v, tuple) else str(v) for v in value)
        entries[f"flag.{key}"] = value
    for name, path in inputs.items():
        entries[f"input.{name}.sha256"] = file_digest(path)
    entries.update(extra)
    return entries


def _write_spectra(path, row: np.ndarray, col: np.ndarray) -> None:
    lines = ["mode,index,eigenvalue"]
    lines += [f"row,{j + 1},{format_number(v)}" for j, v in enumerate(row)]
    lines += [f"column,{j + 1},{format_number(v)}" for j, v in enumerate(col)]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def cmd_fit(args) -> int:
    series = read_series(args.input)
    T, p1, p2 = series.shape
    k1, k2 = args.k1, args.k2
    if "auto" in (k1, k2):
        ev_row, ev_col = spectra(series, center=args.center)
        if k1 == "auto":
            k1 = estimate_rank(ev_row, args.k_max or default_k_max(p1))
        if k2 == "auto":
            k2 = estimate_rank(ev_col, args.k_max or default_k_max(p2))
    result = fit(series, k1, k2, center=args.center)

    out = ensure_dir(args.out_dir)
    L = result.loadings
    offset = result.mean if result.centered else 0.0
    write_matrix_csv(out / "R.csv", L.R)
    write_matrix_csv(out / "C.csv", L.C)
    write_blocks_csv(out / "Z.csv", result.scores.Z)
    write_blocks_csv(out / "E.csv", result.scores.E)
    write_blocks_csv(out / "F.csv", result.scores.F)
    write_series(out / "signal.mats", MatrixSeries(result.signal.data + offset))
    write_series(out / "signal_bilinear.mats", MatrixSeries(bilinear_signal(result.series, L).data + offset))
    _write_spectra(out / "spectra.csv", result.all_eigvals_row, result.all_eigvals_col)
    if result.centered:
        write_matrix_csv(out / "mean.csv", result.mean)
    if args.varimax:
        for name, M in (("R", L.R), ("C", L.C)):
            rotated, rotation = varimax(M)
            write_matrix_csv(out / f"{name}_varimax.csv", rotated)
            write_matrix_csv(out / f"{name}_varimax_rotation.csv", rotation)
            display = np.trunc(30.0 * rotated).astype(int)
            (out / f"{name}_varimax_x30.csv").write_text(
                "".join(",".join(str(v) for v in row) + "\n" for row in display), encoding="utf-8"
            )
    write_manifest(
        out,
        _manifest(args, "fit", {"input": args.input}, k1_used=k1, k2_used=k2, T=T, p1=p1, p2=p2),
    )
    print(f"k1={k1} k2={k2}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    config = ScenarioConfig(
        scenario=Scenario(args.scenario),
        T=args.T,
        p1=args.p1,
        p2=args.p2,
        k1=args.k1,
        k2=args.k2,
        phi=args.phi,
        psi=args.psi,
        gamma=args.gamma,
        seed=args.seed,
        noise=not args.no_noise,
    )
    data = generate_scenario(config)
    out = ensure_dir(args.out_dir)
    write_series(out / "observations.mats", data.observations)
    write_series(out / "signal.mats", data.truth_signal)
    write_matrix_csv(out / "R.csv", data.truth_R)
    write_matrix_csv(out / "C.csv", data.truth_C)
    write_blocks_csv(out / "Z.csv", data.truth_factors.Z)
    write_blocks_csv(out / "E.csv", data.truth_factors.E)
    write_blocks_csv(out / "F.csv", data.truth_factors.F)
    write_manifest(
        out,
        _manifest(
            args, "simulate", {}, seed=config.seed,
            phi=format_number(config.phi), psi=format_number(config.psi), gamma=format_number(config.gamma),
        ),
    )
    return EXIT_OK


def _parse_metrics(text: str) -> list[str]:
    if text == "all":
        return list(ALL_METRICS)
    names = [m.strip() for m in text.split(",") if m.strip()]
    unknown = [m for m in names if m not in ALL_METRICS]
    if unknown:
        raise UsageError(f"unknown metrics {unknown}; choose from {', '.join(ALL_METRICS)}")
    return names


def _fmt(v: float) -> str:
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return format_number(v)


def cmd_evaluate(args) -> int:
    metrics = _parse_metrics(args.metrics)
    observations = read_series(args.observations)
    inputs = {"observations": args.observations}
    truth_signal = None
    if args.truth_signal:
        truth_signal = read_series(args.truth_signal)
        inputs["truth_signal"] = args.truth_signal
    truth_loadings = None
    if args.truth_loadings:
        d = Path(args.truth_loadings)
        truth_loadings = (read_matrix_csv(d / "R.csv"), read_matrix_csv(d / "C.csv"))
        inputs["truth_R"], inputs["truth_C"] = d / "R.csv", d / "C.csv"
    loadings = {}
    for name, path in args.loadings or []:
        d = Path(path)
        loadings[name] = (read_matrix_csv(d / "R.csv"), read_matrix_csv(d / "C.csv"))
        inputs[f"{name}.R"], inputs[f"{name}.C"] = d / "R.csv", d / "C.csv"
    if not args.estimated:
        raise UsageError("at least one --estimated NAME=PATH is required")

    rows = []
    psnr_rows = []
    out = ensure_dir(args.out_dir)
    for name, path in args.estimated:
        est = read_series(path)
        inputs[f"{name}.signal"] = path
        if est.shape != observations.shape:
            raise UsageError(f"{path}: shape {est.shape} does not match observations {observations.shape}")
        if "dist" in metrics and truth_loadings is not None and name in loadings:
            rows.append((name, "dist_R", space_distance(loadings[name][0], truth_loadings[0])))
            rows.append((name, "dist_C", space_distance(loadings[name][1], truth_loadings[1])))
        if "rmse_signal" in metrics and truth_signal is not None:
            rows.append((name, "rmse_signal", rmse_signal(est, truth_signal)))
        if "rmse_x" in metrics:
            rows.append((name, "rmse_x", rmse_signal(est, observations)))
        if "psnr" in metrics:
            per_obs = psnr_series(observations, est)
            rows.append((name, "psnr_mean", float(np.mean(per_obs))))
            psnr_rows += [(name, t, v) for t, v in enumerate(per_obs)]
        for mode in ("row", "column", "vectorized"):
            if f"corr_{mode}" in metrics:
                rows.append((name, f"corr_{mode}", correlation_distance(observations, est, mode)))
                if args.emit_correlations and mode != "vectorized":
                    write_matrix_csv(out / f"corr_{mode}_{name}.csv", correlation_matrix(est, mode))
    if args.emit_correlations:
        for mode in ("row", "column"):
            if f"corr_{mode}" in metrics:
                write_matrix_csv(out / f"corr_{mode}_observations.csv", correlation_matrix(observations, mode))

    lines = ["method,metric,value"] + [f"{m},{k},{_fmt(v)}" for m, k, v in rows]
    (out / "report.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    if psnr_rows:
        lines = ["method,t,psnr"] + [f"{m},{t + 1},{_fmt(v)}" for m, t, v in psnr_rows]
        (out / "psnr_per_observation.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    write_manifest(out, _manifest(args, "evaluate", inputs))
    for m, k, v in rows:
        print(f"{m},{k},{_fmt(v)}")
    return EXIT_OK


def cmd_estimate_rank(args) -> int:
    series = read_series(args.input)
    _, p1, p2 = series.shape
    k_max = args.k_max
    if k_max is not None and not 1 <= k_max < min(p1, p2):
        raise UsageError(f"--k-max must satisfy 1 <= k_max < min(p1, p2) = {min(p1, p2)}, got {k_max}")
    ev_row, ev_col = spectra(series, center=args.center)
    k1 = estimate_rank(ev_row, k_max or default_k_max(p1))
    k2 = estimate_rank(ev_col, k_max or default_k_max(p2))
    out = ensure_dir(args.out_dir)
    (out / "rank.txt").write_text(f"k1={k1}\nk2={k2}\n", encoding="utf-8")
    _write_spectra(out / "spectra.csv", ev_row, ev_col)
    write_manifest(out, _manifest(args, "estimate-rank", {"input": args.input}, k1=k1, k2=k2))
    print(f"k1={k1}")
    print(f"k2={k2}")
    print("row_spectrum=" + " ".join(format_number(v) for v in ev_row))
    print("column_spectrum=" + " ".join(format_number(v) for v in ev_col))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tedfam", description="Tensor-decomposition matrix factor model tools")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="estimate loadings, factor scores and signal")
    p.add_argument("input", help="MATSERIES file")
    p.add_argument("--k1", type=_rank_arg, required=True, help="row factor number or 'auto'")
    p.add_argument("--k2", type=_rank_arg, required=True, help="column factor number or 'auto'")
    p.add_argument("--k-max", type=int, default=None, help="upper bound for 'auto' (default min(20, p/2, p-1))")
    p.add_argument("--center", action=argparse.BooleanOptionalAction, default=True,
                   help="subtract the temporal mean of each entry first")
    p.add_argument("--varimax", action="store_true", help="also write varimax-rotated loadings")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("simulate", help="generate a scenario dataset with ground truth")
    p.add_argument("--scenario", choices=[s.value for s in Scenario], required=True)
    p.add_argument("--T", type=int, required=True)
    p.add_argument("--p1", type=int, required=True)
    p.add_argument("--p2", type=int, required=True)
    p.add_argument("--k1", type=int, default=3)
    p.add_argument("--k2", type=int, default=3)
    p.add_argument("--phi", type=float, default=None)
    p.add_argument("--psi", type=float, default=None)
    p.add_argument("--gamma", type=float, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-noise", action="store_true", help="omit the noise term (testing only)")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("evaluate", help="score reconstructions against observations and truth")
    p.add_argument("--observations", required=True)
    p.add_argument("--estimated", type=_named, action="append", metavar="NAME=PATH")
    p.add_argument("--loadings", type=_named, action="append", metavar="NAME=DIR",
                   help="directory holding R.csv and C.csv for method NAME")
    p.add_argument("--truth-signal")
    p.add_argument("--truth-loadings", metavar="DIR")
    p.add_argument("--metrics", default="all", help=f"comma list from {','.join(ALL_METRICS)} or 'all'")
    p.add_argument("--emit-correlations", action="store_true",
                   help="write row/column correlation matrices as CSV")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("estimate-rank", help="eigenvalue-ratio factor numbers")
    p.add_argument("input")
    p.add_argument("--k-max", type=int, default=None)
    p.add_argument("--center", action=argparse.BooleanOptionalAction, default=True)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_estimate_rank)
    return parser


def _run(args) -> int:
    threads = os.environ.get(THREADS_ENV)
    if threads:
        from threadpoolctl import threadpool_limits

        with threadpool_limits(limits=int(threads)):
            return args.func(args)
    return args.func(args)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _run(args)
    except ParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"error: {exc.filename}: {exc.strerror}", file=sys.stderr)
        return EXIT_IO
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (NumericalError, np.linalg.LinAlgError) as exc:
        print(f"error: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
