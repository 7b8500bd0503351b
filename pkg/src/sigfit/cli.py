"""Command-line driver: ``sigfit run|sweep|detect|report``."""

from __future__ import annotations

import argparse
import json
import sys
from contextlib import nullcontext
from pathlib import Path

from .errors import ConfigurationError, SigfitError, SizeError
from .experiments import (
    ExperimentConfig,
    build_inputs,
    convergence_sweep,
    format_table,
    preset,
    run_experiment,
)

EXIT_OK, EXIT_CONFIG, EXIT_FAILED = 0, 2, 3


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--preset", help="paper-1d, paper-2d, paper-2curves, paper-3d or smoke")
    p.add_argument("--config", help="key = value configuration file")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override one configuration key (repeatable)")
    p.add_argument("--reduced", action="store_true", help="smaller paper-3d (N=33, degree 6)")
    p.add_argument("--out", help="output directory (default runs/<name>)")
    p.add_argument("--threads", type=int, help="cap on BLAS worker threads")
    p.add_argument("--seed", type=int, help="reserved; the pipeline is deterministic")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sigfit", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run one experiment and write its artifacts")
    _common(run)
    sweep = sub.add_parser("sweep", help="convergence table over h, h/2, h/4, ...")
    _common(sweep)
    sweep.add_argument("--levels", type=int, default=3)
    det = sub.add_parser("detect", help="detection only: cloud and zero set")
    _common(det)
    rep = sub.add_parser("report", help="print the summaries of a finished run")
    rep.add_argument("--out", required=True, help="run directory")
    return parser


def load_config(args) -> ExperimentConfig:
    cfg = preset(args.preset, reduced=args.reduced) if args.preset else ExperimentConfig()
    if args.reduced and not args.preset:
        cfg = preset("paper-3d", reduced=True)
    if args.config:
        cfg = ExperimentConfig.parse(Path(args.config).read_text(), base=cfg)
    for item in args.set:
        if "=" not in item:
            raise ConfigurationError(f"--set expects KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        cfg.set(key.strip(), value.strip())
    cfg.validate()
    return cfg


def _threads(n):
    if n is None:
        return nullcontext()
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=n)


def _print_summary(manifest: dict) -> None:
    print(f"status: {manifest['status']}  regions: {manifest['regions']}  rank: {manifest['rank']}")
    print(f"first-stage max grid error: {manifest['first_stage_grid_max']:.3e}")
    for key, s in manifest.get("summaries", {}).items():
        print(
            f"{key:12s} max {s['max_abs']:.3e}  boundary {s['max_boundary']:.3e}  "
            f"singular {s['max_singular']:.3e}  elsewhere {s['max_elsewhere']:.3e}"
        )


def cmd_run(args) -> int:
    cfg = load_config(args)
    out = Path(args.out or Path("runs") / cfg.name)
    with _threads(args.threads):
        manifest = run_experiment(cfg, out)
    _print_summary(manifest)
    print(f"artifacts in {out}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = load_config(args)
    out = Path(args.out or Path("runs") / f"{cfg.name}-sweep")
    out.mkdir(parents=True, exist_ok=True)
    with _threads(args.threads):
        table = convergence_sweep(cfg, args.levels)
    text = format_table(table)
    (out / "sweep.csv").write_text(text)
    print(text, end="")
    return EXIT_OK


def cmd_detect(args) -> int:
    from .detect import detect_regions

    cfg = load_config(args)
    out = Path(args.out or Path("runs") / f"{cfg.name}-detect")
    out.mkdir(parents=True, exist_ok=True)
    _, g = build_inputs(cfg)
    with _threads(args.threads):
        lab = detect_regions(
            g, order=cfg.detect_order, tau=cfg.tau_value(), max_hits=cfg.max_hits,
            net_size=cfg.net_size, d_levelset=cfg.levelset_spacing,
            q0_weight=cfg.q0_weight, max_regions=cfg.max_regions, refine=cfg.refine_labels,
        )
    if g.dim == 1:
        (out / "cloud.csv").write_text("x\n" + "".join(f"{b!r}\n" for b in lab.breakpoints))
    else:
        lab.cloud.to_csv(out / "cloud.csv")
        if lab.levelset is not None:
            lab.levelset.zero_set_to_csv(out / "zero_set.csv")
    print(f"regions: {lab.n_regions}")
    if g.dim == 1:
        print("breakpoints: " + ", ".join(f"{b:.6g}" for b in lab.breakpoints))
    else:
        print(f"cloud points: {len(lab.cloud)}")
    return EXIT_OK


def cmd_report(args) -> int:
    path = Path(args.out) / "manifest.json"
    if not path.exists():
        print(f"no manifest in {args.out}", file=sys.stderr)
        return EXIT_CONFIG
    manifest = json.loads(path.read_text())
    print(f"run: {manifest['config']['name']}  function: {manifest['config']['function']}")
    if manifest["status"] != "ok":
        print(f"status: {manifest['status']}  {manifest.get('error', '')}")
        return EXIT_FAILED
    _print_summary(manifest)
    return EXIT_OK


COMMANDS = {"run": cmd_run, "sweep": cmd_sweep, "detect": cmd_detect, "report": cmd_report}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (SigfitError, ValueError, OSError) as exc:
        print(f"sigfit: error: {exc}", file=sys.stderr)
        if isinstance(exc, (ConfigurationError, SizeError, OSError)):
            return EXIT_CONFIG
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
