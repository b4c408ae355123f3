"""Command-line entry point: detect, simulate, benchmark.

Exit codes: 0 on success, 2 on invalid input or configuration, 1 on
internal errors. All randomness flows from --seed; when omitted, a seed is
drawn from system entropy and printed so the run can be reproduced.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import secrets
import sys
import time
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import metrics
from .cusum import LocatorConfig, amoc_detect, binary_segmentation, step_mean_estimate
from .errors import ParcsError, ValidationError
from .inference import BootstrapConfig, SignificanceResult, _significance_results
from .metrics import CSV_COLUMNS, DetectionOutcome, MetricReport, report_row
from .model import default_forward_bound, fit_parcs, reconstruct_step_estimate
from .series import MultiSeries, sqrt_transform
from .synth import RngSpec, StepModelSpec, default_max_cps, generate, scenario

METHODS = ("parcs", "cusum", "cusum-ml", "binseg")

RESULT_SCHEMA = "parcs-result/1"
SIM_SCHEMA = "parcs-sim/1"


def _fmt(x: float) -> str:
    """Full-precision decimal text that round-trips the float exactly."""
    return repr(float(x))


def ingest_csv(path) -> MultiSeries:
    """Read a wide CSV (rows = time steps, columns = covariates).

    A single header row is auto-detected when any cell of the first row is
    non-numeric. Errors carry 1-based file row and column coordinates.
    """
    rows: list[list[str]] = []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if row and any(cell.strip() for cell in row):
                rows.append(row)
    if not rows:
        raise ValidationError(f"{path}: empty file")

    def parse_cell(cell: str) -> Optional[float]:
        try:
            return float(cell)
        except ValueError:
            return None

    start = 0
    if any(parse_cell(cell) is None for cell in rows[0]):
        start = 1
    width = len(rows[start]) if start < len(rows) else 0
    data = []
    for i, row in enumerate(rows[start:], start=start + 1):
        if len(row) != width:
            raise ValidationError(f"{path}: ragged row {i} has {len(row)} cells, expected {width}")
        parsed = []
        for j, cell in enumerate(row, start=1):
            value = parse_cell(cell)
            if value is None or not math.isfinite(value):
                raise ValidationError(f"{path}: non-numeric cell at row {i}, column {j}: {cell!r}")
            parsed.append(value)
        data.append(parsed)
    if len(data) < 3:
        raise ValidationError(f"{path}: need at least 3 time steps, got {len(data)}")
    return MultiSeries(np.asarray(data))


def write_series_csv(path, ms: MultiSeries) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"u{n + 1}" for n in range(ms.N)])
        for t in range(ms.T):
            writer.writerow([_fmt(v) for v in ms.values[t]])


def _boot_from_args(args) -> BootstrapConfig:
    block = args.block_size
    if block != "auto":
        block = int(block)
    return BootstrapConfig(B=args.bootstrap, alpha=args.alpha, block_size=block, Q=args.ma_upper_bound)


def _cp_record(cp) -> dict:
    return {
        "location": cp.location,
        "rank": cp.rank,
        "statistic": cp.statistic,
        "p_value": cp.p_value,
        "step_weights": list(cp.step_weights),
    }


def detect_document(
    ms: MultiSeries,
    method: str,
    boot: BootstrapConfig,
    rng: RngSpec,
    max_cps: int,
    forward: Optional[int] = None,
    gamma: float = 0.0,
    max_depth: int = 1,
) -> dict:
    """Run one detection and assemble the JSON-ready result document."""
    if method not in METHODS:
        raise ValidationError(f"unknown method '{method}'; choose from {', '.join(METHODS)}")
    if method in ("cusum", "cusum-ml", "binseg") and ms.N != 1:
        raise ValidationError(f"method '{method}' handles univariate input only (got N={ms.N})")

    params: dict = {"alpha": boot.alpha, "bootstrap": boot.B, "block_size": boot.block_size, "ma_upper_bound": boot.Q}
    if method == "parcs":
        L = default_forward_bound(max_cps) if forward is None else int(forward)
        model = fit_parcs(ms, max_cps, L)
        result = _significance_results(ms, model, boot, rng, alphas=(boot.alpha,))[boot.alpha]
        reconstructed = reconstruct_step_estimate(result.reconstructed_model).values
        params.update({"max_cps": max_cps, "forward": L})
    else:
        ts = ms.column(0)
        if method == "binseg":
            config = LocatorConfig(gamma)
            result = binary_segmentation(ts, config, boot, max_depth, rng)
            params.update({"gamma": config.gamma, "max_depth": max_depth})
        else:
            config = LocatorConfig(0.5 if method == "cusum-ml" else gamma)
            result = amoc_detect(ts, config, boot, rng)
            params.update({"gamma": config.gamma})
        reconstructed = step_mean_estimate(ts, result.accepted_locations)[:, None]

    return {
        "schema": RESULT_SCHEMA,
        "method": method,
        "T": ms.T,
        "N": ms.N,
        "parameters": params,
        "accepted_cps": [_cp_record(cp) for cp in result.accepted],
        "rejected_cps": [_cp_record(cp) for cp in result.rejected],
        "estimated_ma_order": result.estimated_q,
        "reconstructed_mean": [list(map(float, reconstructed[:, n])) for n in range(reconstructed.shape[1])],
        "diagnostics": list(result.diagnostics),
    }


def run_detection(
    ms: MultiSeries,
    method: str,
    boot: BootstrapConfig,
    rng: RngSpec,
    max_cps: int,
    alphas: Sequence[float],
    forward: Optional[int] = None,
    gamma: float = 0.0,
    max_depth: int = 1,
) -> dict[float, SignificanceResult]:
    """Detection across an alpha grid, reusing bootstrap samples where the
    method allows it (PARCS and single-test CUSUM; segmentation re-runs)."""
    if method == "parcs":
        L = default_forward_bound(max_cps) if forward is None else int(forward)
        model = fit_parcs(ms, max_cps, L)
        return _significance_results(ms, model, boot, rng, alphas=tuple(alphas))
    ts = ms.column(0)
    out = {}
    for alpha in alphas:
        boot_a = BootstrapConfig(
            B=boot.B, alpha=float(alpha), block_size=boot.block_size, Q=boot.Q,
            shared_blocks=boot.shared_blocks,
        )
        if method == "binseg":
            out[alpha] = binary_segmentation(ts, LocatorConfig(gamma), boot_a, max_depth, rng)
        elif method == "cusum-ml":
            out[alpha] = amoc_detect(ts, LocatorConfig(0.5), boot_a, rng)
        else:
            out[alpha] = amoc_detect(ts, LocatorConfig(gamma), boot_a, rng)
    return out


def run_condition(
    spec: StepModelSpec,
    method: str,
    alphas: Sequence[float],
    realisations: int,
    boot: BootstrapConfig,
    seed: int,
    max_cps: Optional[int] = None,
    forward: Optional[int] = None,
    gamma: float = 0.0,
    max_depth: int = 1,
    preprocess_sqrt: bool = False,
    jobs: int = 1,
) -> dict[float, list[DetectionOutcome]]:
    """Generate -> detect -> collect outcomes for one scenario and method.

    Realisation r draws from stream r of the seed, so results do not depend
    on execution order or on the number of worker processes.
    """
    if max_cps is None:
        max_cps = max(1, spec.M + 1) if spec.M != 1 else 1

    def one(r: int) -> dict[float, tuple[int, ...]]:
        rng = RngSpec(seed, stream_id=r)
        ms = generate(spec, rng)
        if preprocess_sqrt:
            ms = sqrt_transform(ms)
        results = run_detection(
            ms, method, boot, rng.substream(1_000_000), max_cps, alphas,
            forward=forward, gamma=gamma, max_depth=max_depth,
        )
        return {a: res.accepted_locations for a, res in results.items()}

    if jobs > 1:
        from joblib import Parallel, delayed

        per_real = Parallel(n_jobs=jobs)(delayed(one)(r) for r in range(realisations))
    else:
        per_real = [one(r) for r in range(realisations)]

    out: dict[float, list[DetectionOutcome]] = {float(a): [] for a in alphas}
    for locs_by_alpha in per_real:
        for a, locs in locs_by_alpha.items():
            out[float(a)].append(DetectionOutcome(truth=spec, detected=locs))
    return out


def condition_report(
    condition: str, method: str, alpha: float, outcomes: Sequence[DetectionOutcome]
) -> MetricReport:
    truth = outcomes[0].truth
    true_cps = metrics.effective_cps(truth)
    type_I, type_II = metrics.error_rates(outcomes)
    accuracy = tuple(
        metrics.accuracy_score(outcomes, c, truth.T, len(true_cps)) for c in true_cps
    )
    return MetricReport(
        condition=condition,
        method=method,
        alpha_nominal=float(alpha),
        type_I=type_I,
        type_II=type_II,
        accuracy=accuracy,
        centre_bias_samples=metrics.centre_bias_samples(outcomes),
    )


# ---------------------------------------------------------------------------
# argparse handlers


def _add_boot_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--bootstrap", type=int, default=10000, metavar="B")
    p.add_argument("--block-size", default="auto", help="block length k, or 'auto' (default)")
    p.add_argument("--ma-upper-bound", type=int, default=9, metavar="Q")
    p.add_argument("--seed", type=int, default=None)


def _resolve_seed(args) -> int:
    if args.seed is None:
        seed = secrets.randbits(63)
        print(f"seed: {seed}", file=sys.stderr)
        return seed
    return int(args.seed)


def _cmd_detect(args) -> int:
    ms = ingest_csv(args.input)
    if args.preprocess == "sqrt":
        ms = sqrt_transform(ms)
    boot = _boot_from_args(args)
    seed = _resolve_seed(args)
    doc = detect_document(
        ms,
        args.method,
        boot,
        RngSpec(seed),
        max_cps=args.max_cps,
        forward=args.forward,
        gamma=args.gamma,
        max_depth=args.max_depth,
    )
    text = json.dumps(doc, indent=2)
    if args.output:
        Path(args.output).write_text(text + "\n")
    else:
        print(text)
    return 0


def _parse_overrides(pairs: Sequence[str]) -> dict:
    allowed = {"T": int, "sigma": float, "w0": float, "c": int}
    out = {}
    for pair in pairs:
        if "=" not in pair:
            raise ValidationError(f"override must look like key=value, got '{pair}'")
        key, value = pair.split("=", 1)
        if key not in allowed:
            raise ValidationError(f"unknown override '{key}'; allowed: {', '.join(sorted(allowed))}")
        out[key] = allowed[key](value)
    return out


def _spec_document(spec: StepModelSpec, name: str, overrides: dict, seed: int, realisations: int) -> dict:
    return {
        "schema": SIM_SCHEMA,
        "scenario": name,
        "overrides": overrides,
        "T": spec.T,
        "N": spec.N,
        "baseline": list(map(float, spec.baseline)),
        "cps": list(spec.cps),
        "weights": [list(map(float, row)) for row in spec.weights],
        "ma_coeffs": list(spec.ma_coeffs),
        "sigma": spec.sigma,
        "noise_kind": spec.noise_kind,
        "seed": seed,
        "realisations": realisations,
    }


def _cmd_simulate(args) -> int:
    overrides = _parse_overrides(args.override or [])
    spec = scenario(args.scenario, **overrides)
    seed = _resolve_seed(args)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    if args.format == "long":
        with open(out_dir / "series.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["realisation", "t", "covariate", "value"])
            for r in range(args.realisations):
                ms = generate(spec, RngSpec(seed, stream_id=r))
                for t in range(ms.T):
                    for n in range(ms.N):
                        writer.writerow([r, t + 1, n + 1, _fmt(ms.values[t, n])])
    else:
        width = len(str(max(args.realisations - 1, 0)))
        for r in range(args.realisations):
            ms = generate(spec, RngSpec(seed, stream_id=r))
            write_series_csv(out_dir / f"realisation_{r:0{width}d}.csv", ms)

    sidecar = _spec_document(spec, args.scenario, overrides, seed, args.realisations)
    (out_dir / "spec.json").write_text(json.dumps(sidecar, indent=2) + "\n")
    return 0


def _cmd_benchmark(args) -> int:
    overrides = _parse_overrides(args.override or [])
    spec = scenario(args.scenario, **overrides)
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    for m in methods:
        if m not in METHODS:
            raise ValidationError(f"unknown method '{m}'; choose from {', '.join(METHODS)}")
    alphas = [float(a) for a in args.alpha_grid.split(",") if a.strip()]
    if not alphas:
        raise ValidationError("empty --alpha-grid")
    seed = _resolve_seed(args)
    boot = _boot_from_args(args)
    max_cps = args.max_cps if args.max_cps is not None else default_max_cps(args.scenario)

    rows = []
    timings = []
    for method in methods:
        t0 = time.perf_counter()
        outcomes_by_alpha = run_condition(
            spec,
            method,
            alphas,
            args.realisations,
            boot,
            seed,
            max_cps=max_cps,
            forward=args.forward,
            gamma=args.gamma,
            max_depth=args.max_depth,
            preprocess_sqrt=(args.preprocess == "sqrt"),
            jobs=args.jobs,
        )
        t1 = time.perf_counter()
        for alpha in sorted(outcomes_by_alpha):
            report = condition_report(args.scenario, method, alpha, outcomes_by_alpha[alpha])
            rows.append(report_row(report))
        t2 = time.perf_counter()
        timings.append((method, t1 - t0, t2 - t1))

    columns = list(CSV_COLUMNS)
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([row[c] if c in ("condition", "method") else _fmt(row[c]) for c in columns])

    for method, t_detect, t_score in timings:
        print(f"timing {method}: detect {t_detect:.2f}s score {t_score:.2f}s", file=sys.stderr)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="parcs", description="Change-point detection toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p_detect = sub.add_parser("detect", help="detect change points in a CSV series")
    p_detect.add_argument("--input", required=True)
    p_detect.add_argument("--method", default="parcs", choices=METHODS)
    p_detect.add_argument("--max-cps", type=int, default=1, metavar="M")
    p_detect.add_argument("--forward", type=int, default=None, metavar="L")
    p_detect.add_argument("--gamma", type=float, default=0.0)
    p_detect.add_argument("--max-depth", type=int, default=1)
    p_detect.add_argument("--preprocess", choices=["sqrt"], default=None)
    p_detect.add_argument("--output", default=None)
    _add_boot_args(p_detect)
    p_detect.set_defaults(func=_cmd_detect)

    p_sim = sub.add_parser("simulate", help="write synthetic realisations of a scenario preset")
    p_sim.add_argument("--scenario", required=True)
    p_sim.add_argument("--override", action="append", metavar="key=val")
    p_sim.add_argument("--realisations", type=int, default=1)
    p_sim.add_argument("--seed", type=int, default=None)
    p_sim.add_argument("--format", choices=["wide", "long"], default="wide")
    p_sim.add_argument("--out", required=True, metavar="DIR")
    p_sim.set_defaults(func=_cmd_simulate)

    p_bench = sub.add_parser("benchmark", help="generate, detect, and score a scenario")
    p_bench.add_argument("--scenario", required=True)
    p_bench.add_argument("--override", action="append", metavar="key=val")
    p_bench.add_argument("--methods", required=True, help="comma-separated subset of " + ",".join(METHODS))
    p_bench.add_argument("--alpha-grid", required=True, help="comma-separated nominal alphas")
    p_bench.add_argument("--realisations", type=int, default=100)
    p_bench.add_argument("--max-cps", type=int, default=None)
    p_bench.add_argument("--forward", type=int, default=None)
    p_bench.add_argument("--gamma", type=float, default=0.0)
    p_bench.add_argument("--max-depth", type=int, default=1)
    p_bench.add_argument("--preprocess", choices=["sqrt"], default=None)
    p_bench.add_argument("--jobs", type=int, default=1)
    p_bench.add_argument("--out", required=True, metavar="F.csv")
    _add_boot_args(p_bench)
    p_bench.set_defaults(func=_cmd_benchmark)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ParcsError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # pragma: no cover - defensive
        import traceback

        traceback.print_exc()
        return 1


if __name__ == "__main__":
    sys.exit(main())
