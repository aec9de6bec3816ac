"""Command line entry point: ``edgesr train|sr|eval|edges|gradcheck|ablate``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import checkpoint, harness
from .canny import canny
from .config import load_config
from .imageio import load_image, save_image
from .metrics import MissingCounterpart, evaluate_dir

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _overrides(items) -> dict[str, str]:
    out = {}
    for item in items or []:
        if "=" not in item:
            raise UsageError(f"--set expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def _config(args):
    try:
        return load_config(args.config, _overrides(args.set))
    except (KeyError, ValueError) as exc:
        raise UsageError(f"bad configuration: {exc}") from None


def cmd_train(args) -> int:
    if args.resume:
        path = harness.resume(args.resume, args.data, stop_after=args.stop_after)
    else:
        if not args.data or not args.out:
            raise UsageError("train needs --data and --out (or --resume STATE)")
        path = harness.train(_config(args), args.data, args.out, stop_after=args.stop_after)
    print(path)
    return EXIT_OK


def cmd_ablate(args) -> int:
    if args.variant not in harness.VARIANTS:
        raise UsageError(f"unknown variant {args.variant!r}; choose from {', '.join(harness.VARIANTS)}")
    print(harness.ablate(_config(args), args.variant, args.data, args.out))
    return EXIT_OK


def cmd_sr(args) -> int:
    for p in harness.super_resolve(args.ckpt, args.inp, args.out, args.scale):
        print(p)
    return EXIT_OK


def cmd_eval(args) -> int:
    report = evaluate_dir(args.sr, args.hr)
    print(report.table())
    if args.csv:
        report.write_csv(args.csv)
    return EXIT_OK


def cmd_edges(args) -> int:
    if not 0 <= args.low < args.high:
        raise UsageError(f"thresholds need 0 <= low < high, got low={args.low}, high={args.high}")
    edges = canny(load_image(args.inp), args.sigma, args.ksize, args.low, args.high, not args.absolute)
    save_image(edges.to_image(), args.out)
    print(f"{edges.count()} edge pixels -> {args.out}")
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    from .gradcheck import SUITES, run_suite

    names = SUITES if args.module in (None, "all") else (args.module,)
    if any(n not in SUITES for n in names):
        raise UsageError(f"unknown module {args.module!r}; choose from all, {', '.join(SUITES)}")
    failed = 0
    for name in names:
        results = run_suite(name, seeds=tuple(range(args.seeds)))
        bad = [r for r in results if not r.ok]
        failed += len(bad)
        print(f"{name:<14s} {len(results) - len(bad)}/{len(results)} ok")
        for r in bad if not args.verbose else results:
            print("  ", r)
    return EXIT_OK if failed == 0 else EXIT_DATA


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="edgesr", description="Edge-attention super-resolution: training, inference and evaluation.")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    def config_args(sp):
        sp.add_argument("--config", help="key = value configuration file")
        sp.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key (repeatable)")

    t = sub.add_parser("train", help="two-stage training")
    config_args(t)
    t.add_argument("--data", help="directory of HR training images")
    t.add_argument("--out", help="output directory for checkpoints and the log")
    t.add_argument("--resume", metavar="STATE", help="continue from a state file")
    t.add_argument("--stop-after", type=int, metavar="EPOCHS", help="stop once this many epochs are complete")
    t.set_defaults(func=cmd_train)

    a = sub.add_parser("ablate", help="train a single-ablation variant")
    config_args(a)
    a.add_argument("--variant", required=True, help=", ".join(harness.VARIANTS))
    a.add_argument("--data", required=True)
    a.add_argument("--out", required=True)
    a.set_defaults(func=cmd_ablate)

    s = sub.add_parser("sr", help="super-resolve an image or a directory")
    s.add_argument("--ckpt", required=True)
    s.add_argument("--in", dest="inp", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--scale", type=int, help="expected scale; must match the checkpoint")
    s.set_defaults(func=cmd_sr)

    e = sub.add_parser("eval", help="PSNR/SSIM of SR images against HR references")
    e.add_argument("--sr", required=True)
    e.add_argument("--hr", required=True)
    e.add_argument("--csv")
    e.set_defaults(func=cmd_eval)

    g = sub.add_parser("edges", help="Canny edge map of an image")
    g.add_argument("--in", dest="inp", required=True)
    g.add_argument("--out", required=True)
    g.add_argument("--sigma", type=float, default=1.0)
    g.add_argument("--ksize", type=int, default=5)
    g.add_argument("--low", type=float, default=0.1)
    g.add_argument("--high", type=float, default=0.2)
    g.add_argument("--absolute", action="store_true", help="thresholds are gradient magnitudes, not fractions of the peak")
    g.set_defaults(func=cmd_edges)

    c = sub.add_parser("gradcheck", help="finite-difference gradient checks")
    c.add_argument("--module", help="all (default), ops, losses, nea, hybrid, generator, discriminator")
    c.add_argument("--seeds", type=int, default=3)
    c.add_argument("--verbose", action="store_true")
    c.set_defaults(func=cmd_gradcheck)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_help(sys.stderr)
            return EXIT_USAGE
        return args.func(args)
    except UsageError as exc:
        print(f"edgesr: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except MissingCounterpart as exc:
        print(f"edgesr: error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (harness.TrainingError, checkpoint.CheckpointError, OSError, ValueError, KeyError) as exc:
        print(f"edgesr: error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
