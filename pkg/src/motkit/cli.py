"""Command-line entry point.

Subcommands wire the library into reproducible runs:

  simulate   write a fixture stream + ground-truth file for a scenario
  track      run the tracker over a fixture, write a MOT trajectory file
  eval       compare two MOT files, write a metrics report + figures
  ablate     run variant / memory-rate suites, write a table + figures
  selftest   run the built-in oracle checks (assignment, metrics, gradients)

Exit codes: 0 success, 1 usage error, 2 input/format error, 3 numeric
failure. Every run prints its resolved configuration and seed.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import ablation, fileio, lifecycle, metrics, report, scenario
from .linalg import NumericError

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INPUT = 2
EXIT_NUMERIC = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


class UsageError(Exception):
    pass


def _print_config(args: argparse.Namespace) -> None:
    resolved = {k: v for k, v in sorted(vars(args).items()) if k != "func"}
    print("config: " + " ".join(f"{k}={v}" for k, v in resolved.items()))


def cmd_simulate(args) -> int:
    if args.frames < 1 or args.targets < 1:
        raise UsageError("frames and targets must be >= 1")
    cfg = scenario.ScenarioConfig(
        kind=args.kind, targets=args.targets, frames=args.frames,
        seed=args.seed, sig_similarity=args.sig_similarity,
        noise=args.noise, drift=args.drift,
        random_occlusions=args.occlusions, occlusion_max=args.occlusion_max,
        width=args.width)
    gt, stream = scenario.generate(cfg)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    fixture = out / f"{args.kind}_{args.seed}.fix"
    gt_path = out / f"{args.kind}_{args.seed}_gt.txt"
    fileio.write_fixture(stream, fixture)
    scenario.export_gt(gt, gt_path, frame_size=args.frame_size)
    print(f"wrote {fixture} ({len(stream)} frames) and {gt_path} "
          f"({gt.visible_count()} boxes)")
    return EXIT_OK


def cmd_track(args) -> int:
    run_cfg = fileio.read_config(args.config) if args.config else fileio.RunConfig()
    stream = fileio.read_fixture(args.fixture)
    if stream and stream[0].width != run_cfg.width:
        raise fileio.FormatError(
            f"fixture width {stream[0].width} != config width {run_cfg.width}")
    icfg = run_cfg.to_inference()
    results, _ = lifecycle.run_sequence(stream, icfg)
    rows = fileio.rows_from_results(results, frame_size=run_cfg.frame_size)
    fileio.write_mot(rows, args.out)
    print(f"wrote {args.out} ({len(rows)} rows over {len(results)} frames)")
    return EXIT_OK


def cmd_eval(args) -> int:
    gt_rows = fileio.read_mot(args.gt)
    pred_rows = fileio.read_mot(args.pred)
    gt_seq = fileio.sequence_from_rows(gt_rows)
    pred_seq = fileio.sequence_from_rows(pred_rows)
    if gt_seq and pred_seq:
        lo = max(min(gt_seq), min(pred_seq))
        hi = min(max(gt_seq), max(pred_seq))
        if (min(gt_seq), max(gt_seq)) != (min(pred_seq), max(pred_seq)):
            print(f"warning: frame ranges differ; evaluating [{lo}, {hi}]",
                  file=sys.stderr)
            gt_seq = {f: v for f, v in gt_seq.items() if lo <= f <= hi}
            pred_seq = {f: v for f, v in pred_seq.items() if lo <= f <= hi}
    sm = metrics.evaluate_sequence(gt_seq, pred_seq, name=Path(args.pred).stem)
    rep = metrics.MetricsReport(sequences=[sm])
    written = report.write_report(rep, args.report, figures=not args.no_figures)
    print(f"HOTA {sm.hota:.4f} DetA {sm.deta:.4f} AssA {sm.assa:.4f} "
          f"MOTA {sm.mota:.4f} IDF1 {sm.idf1:.4f}")
    print("wrote " + ", ".join(str(w) for w in written))
    return EXIT_OK


def cmd_ablate(args) -> int:
    suite = ablation.SuiteConfig(scenarios=args.scenarios,
                                 base_seed=args.seed,
                                 targets=args.targets, frames=args.frames)
    if args.lambdas:
        try:
            rates = [float(x) for x in args.lambdas.split(",")]
        except ValueError:
            raise UsageError(f"bad --lambdas value: {args.lambdas!r}")
        entries = ablation.run_lambda_sweep(suite, rates)
        stem = "lambda_sweep"
    else:
        variants = args.variants.split(",")
        from .tim import VARIANTS
        unknown = [v for v in variants if v not in VARIANTS]
        if unknown:
            raise UsageError(f"unknown variant(s): {', '.join(unknown)}")
        entries = ablation.run_variants(suite, variants)
        stem = "variants"
    table = ablation.render_suite_table(entries)
    print(table, end="")
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    table_path = out / f"{stem}.tsv"
    table_path.write_text(table)
    fig = report.plot_comparison([(e.name, e.metrics) for e in entries],
                                 out / f"{stem}.png", title=stem)
    print(f"wrote {table_path} and {fig}")
    return EXIT_OK


def cmd_selftest(args) -> int:
    from . import selftest

    ok = selftest.run(quick=args.quick)
    return EXIT_OK if ok else EXIT_NUMERIC


def build_parser() -> _Parser:
    p = _Parser(prog="motkit", description=__doc__,
                formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = p.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="generate a synthetic scenario")
    sim.add_argument("--kind", choices=scenario.KINDS, default="dance")
    sim.add_argument("--targets", type=int, default=8)
    sim.add_argument("--frames", type=int, default=200)
    sim.add_argument("--seed", type=int, default=42)
    sim.add_argument("--sig-similarity", type=float, default=0.9)
    sim.add_argument("--noise", type=float, default=0.05)
    sim.add_argument("--drift", type=float, default=0.002)
    sim.add_argument("--occlusions", type=int, default=12,
                     help="number of random occlusion windows")
    sim.add_argument("--occlusion-max", type=int, default=20)
    sim.add_argument("--width", type=int, default=64)
    sim.add_argument("--frame-size", type=float, default=1000.0)
    sim.add_argument("--out-dir", required=True)
    sim.set_defaults(func=cmd_simulate)

    trk = sub.add_parser("track", help="run the tracker over a fixture")
    trk.add_argument("--fixture", required=True)
    trk.add_argument("--config", help="run configuration file (key=value)")
    trk.add_argument("--out", required=True)
    trk.set_defaults(func=cmd_track)

    ev = sub.add_parser("eval", help="evaluate a trajectory file against truth")
    ev.add_argument("--gt", required=True)
    ev.add_argument("--pred", required=True)
    ev.add_argument("--report", required=True)
    ev.add_argument("--no-figures", action="store_true")
    ev.set_defaults(func=cmd_eval)

    ab = sub.add_parser("ablate", help="run variant or memory-rate suites")
    ab.add_argument("--suite", default="dance", choices=["dance"])
    ab.add_argument("--variants", default="full,memory-off,attn-off,naive")
    ab.add_argument("--lambdas", help="comma-separated memory rates to sweep")
    ab.add_argument("--scenarios", type=int, default=20)
    ab.add_argument("--targets", type=int, default=8)
    ab.add_argument("--frames", type=int, default=150)
    ab.add_argument("--seed", type=int, default=100)
    ab.add_argument("--out-dir", default="ablation_out")
    ab.set_defaults(func=cmd_ablate)

    st = sub.add_parser("selftest", help="run built-in oracle checks")
    st.add_argument("--quick", action="store_true",
                    help="smaller instance counts")
    st.set_defaults(func=cmd_selftest)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        _print_config(args)
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (fileio.FormatError, FileNotFoundError, ValueError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
