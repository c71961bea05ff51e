"""Command line pipeline: sweep -> emulate -> ingest -> analyze -> advise -> report.

Exit status is 0 on success, 1 on usage errors and 2 on data or validation
errors. Diagnostics go to stderr.
"""

from __future__ import annotations

import argparse
import random
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import report as rpt
from .advisor import DEFAULT_MIN_SPEEDUP, report_layers
from .dispatch import Method, load_config
from .errors import StairpruneError
from .model import LatencySample
from .networks import NETWORK_NAMES, builtin_network
from .pruning import sweep_configs
from .staircase import (
    DEFAULT_REL_TOL,
    aggregate_by_layer,
    detect_plateaus,
    optimal_points,
    regime_split,
    speedup_map,
)

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse would exit 2
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _write(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
        return
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="") as fh:
        fh.write(text)


def _distances(text: str) -> tuple[int, ...]:
    try:
        values = tuple(int(tok) for tok in text.split(",") if tok.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad distance list {text!r}") from None
    if not values or any(d < 0 for d in values):
        raise argparse.ArgumentTypeError("distances must be non-negative integers")
    return values


def cmd_sweep(args) -> int:
    network = builtin_network(args.network)
    layer = network.layer(args.layer)
    _write(args.out, rpt.format_configs(sweep_configs(layer, args.min_channels, args.step)))
    return EXIT_OK


def cmd_emulate(args) -> int:
    configs = rpt.read_configs(args.configs)
    config = load_config(args.profile)
    rng = random.Random(args.seed)
    samples = []
    for spec in configs:
        latency = config.latency(spec, args.method)
        for run in range(args.runs):
            jitter = 1.0 + args.noise * (2 * rng.random() - 1) if args.noise else 1.0
            samples.append(LatencySample(spec.layer_id, spec.out_channels, run, latency * jitter))
    _write(args.out, rpt.format_measurements(samples, device=args.device))
    return EXIT_OK


def cmd_ingest(args) -> int:
    samples = rpt.parse_measurements(args.measurements)
    curves = aggregate_by_layer(samples)
    _write(args.out, rpt.format_curves(curves.values()))
    return EXIT_OK


def _analyze_layer(curve, rel_tol, regimes):
    plateaus = detect_plateaus(curve, rel_tol)
    assignment = regime_split(curve, regimes) if regimes else None
    return plateaus, optimal_points(plateaus), speedup_map(curve), assignment


def cmd_analyze(args) -> int:
    curves = rpt.read_curves(args.curves)
    with ThreadPoolExecutor() as pool:
        results = list(pool.map(lambda c: _analyze_layer(c, args.rel_tol, args.regimes), curves.values()))
    ids = list(curves)
    out = Path(args.out)
    _write(str(out / "plateaus.csv"), rpt.format_plateaus({i: r[0] for i, r in zip(ids, results)}))
    _write(str(out / "optimal_points.csv"), rpt.format_optimal_points({i: r[1] for i, r in zip(ids, results)}))
    _write(str(out / "speedup.csv"), rpt.format_speedups({i: r[2] for i, r in zip(ids, results)}))
    if args.regimes:
        _write(str(out / "regimes.csv"), rpt.format_regimes({i: r[3] for i, r in zip(ids, results)}))
    return EXIT_OK


def cmd_advise(args) -> int:
    curves = rpt.read_curves(args.curves)
    if args.network:
        network = builtin_network(args.network)
        name, layer_ids = network.name, network.layer_ids
    else:
        name, layer_ids = Path(args.curves).stem, list(curves)
    report = report_layers(
        name, layer_ids, curves,
        latency_budget_ms=args.budget_ms,
        min_accuracy=args.min_accuracy,
        min_speedup=args.min_speedup,
        strict=True,
    )
    if args.out:
        _write(args.out, report.to_csv())
    sys.stdout.write(report.to_text())
    return EXIT_OK


def cmd_report(args) -> int:
    speedups = rpt.read_speedups(args.speedups)
    row_order = builtin_network(args.network).layer_ids if args.network else None
    grid = rpt.build_heatmap(speedups, args.distances, row_order)
    _write(args.out, rpt.emit_heatmap(grid, args.format))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="stairprune", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("sweep", help="write one-at-a-time pruning configs of a layer")
    p.add_argument("--network", required=True, choices=NETWORK_NAMES)
    p.add_argument("--layer", required=True, help="layer id, e.g. ResNet.L16")
    p.add_argument("--min-channels", type=int, default=1)
    p.add_argument("--step", type=int, default=1)
    p.add_argument("--out")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("emulate", help="synthesise a measurement file from a device profile")
    p.add_argument("--configs", required=True)
    p.add_argument("--profile", default="layer16", help="config path or bundled profile name")
    p.add_argument("--method", choices=[m.value for m in Method], default="gemm")
    p.add_argument("--runs", type=int, default=10)
    p.add_argument("--noise", type=float, default=0.0, help="uniform relative jitter amplitude")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--device", default="emulated")
    p.add_argument("--out")
    p.set_defaults(func=cmd_emulate)

    p = sub.add_parser("ingest", help="median-aggregate measurements into curves")
    p.add_argument("--measurements", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("analyze", help="plateaus, optimal points and speedups per layer")
    p.add_argument("--curves", required=True)
    p.add_argument("--rel-tol", type=float, default=DEFAULT_REL_TOL)
    p.add_argument("--regimes", type=int, default=0, help="also split into K parallel staircases")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("advise", help="recommend pruning levels per layer")
    p.add_argument("--curves", required=True)
    p.add_argument("--network", choices=NETWORK_NAMES)
    group = p.add_mutually_exclusive_group()
    group.add_argument("--budget-ms", type=float)
    group.add_argument("--min-accuracy", type=float)
    p.add_argument("--min-speedup", type=float, default=DEFAULT_MIN_SPEEDUP)
    p.add_argument("--out", help="recommendation CSV")
    p.set_defaults(func=cmd_advise)

    p = sub.add_parser("report", help="speedup heatmap from analyze's speedup.csv")
    p.add_argument("--speedups", required=True)
    p.add_argument("--network", choices=NETWORK_NAMES)
    p.add_argument("--distances", type=_distances, default=rpt.DEFAULT_DISTANCES)
    p.add_argument("--format", choices=["csv", "svg"], default="csv")
    p.add_argument("--out")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "rel_tol", None) is not None and not 0 < args.rel_tol < 1:
        parser.error("--rel-tol must lie in (0, 1)")
    if getattr(args, "runs", 1) < 1:
        parser.error("--runs must be >= 1")
    try:
        return args.func(args)
    except (StairpruneError, OSError) as exc:
        print(f"stairprune: error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
