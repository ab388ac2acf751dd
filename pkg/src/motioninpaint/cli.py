"""Command-line interface.

Exit status: 0 success, 1 usage or configuration error, 2 data error,
3 numerical abort.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import io, synth
from .config import FIELDS, ConfigError, RunConfig, read_config
from .degrade import DegradationSpec, degrade, degraded_fraction
from .errors import DataError, NumericalError
from .metrics import flow_metrics, format_report, image_metrics
from .multires import build_pyramid, estimate_backward_flow, estimate_flow, run_pipeline

log = logging.getLogger("motioninpaint")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _add_config_options(p):
    p.add_argument("--config", type=Path, help="flat key = value configuration file")
    p.add_argument("--print-config", action="store_true", help="print the resolved configuration and exit")
    group = p.add_argument_group("configuration overrides")
    for key, (_, _, _, default) in FIELDS.items():
        names = [f"--{key}"]
        if "_" in key:
            names.append(f"--{key.replace('_', '-')}")
        group.add_argument(*names, dest=f"cfg_{key}", metavar="VALUE", help=f"default: {default}")


def _resolve_config(args):
    values = read_config(args.config) if args.config else {}
    for key in FIELDS:
        value = getattr(args, f"cfg_{key}")
        if value is not None:
            values[key] = value
    return RunConfig.from_values(values)


def _add_output_format(p):
    p.add_argument("--format", choices=("pnm", "png"), default="pnm", help="frame file format")
    p.add_argument("--bits", type=int, choices=(8, 16), default=8, help="output bit depth")


def _require(args, *names):
    missing = [n for n in names if getattr(args, n) is None]
    if missing:
        raise UsageError("missing required argument(s): " + ", ".join(missing))


# ---------------------------------------------------------------------------
# subcommands


def cmd_inpaint(args):
    cfg = _resolve_config(args)
    if args.print_config:
        sys.stdout.write(cfg.to_text())
        return EXIT_OK
    _require(args, "sequence", "mask", "output")
    u0 = io.read_sequence(args.sequence)
    mask = io.read_mask(args.mask)
    if mask.shape != u0.shape[:3]:
        raise DataError(f"{args.mask}: mask is {mask.shape}, sequence is {u0.shape[:3]}")
    trace = []
    u, v, w = run_pipeline(u0, mask, cfg.energy, cfg.pyramid, cfg.flow, trace=trace)
    io.write_sequence(args.output, u, args.format, args.bits)
    if args.forward_flow:
        io.write_flow(args.forward_flow, v)
    if args.backward_flow:
        io.write_flow(args.backward_flow, w)
    if args.trace:
        io.write_trace(args.trace, trace)
    if trace and trace[-1][1]:
        log.info("final energy %.8g", trace[-1][1][-1])
    return EXIT_OK


def cmd_flow(args):
    cfg = _resolve_config(args)
    if args.print_config:
        sys.stdout.write(cfg.to_text())
        return EXIT_OK
    _require(args, "sequence", "output")
    u = io.read_sequence(args.sequence)
    if u.shape[0] < 2:
        raise DataError(f"{args.sequence}: flow needs at least two frames")
    v = estimate_flow(u, cfg.pyramid, cfg.flow)
    io.write_flow(args.output, v)
    if args.backward_flow:
        io.write_flow(args.backward_flow, estimate_backward_flow(u, v, cfg.pyramid, cfg.flow))
    return EXIT_OK


def cmd_degrade(args):
    try:
        spec = DegradationSpec(
            seed=args.seed, blotches=args.blotches, vertices=tuple(args.vertices), size=tuple(args.size),
            overlap=args.overlap, noise=args.noise, fill=args.fill, fill_value=args.fill_value,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    u = io.read_sequence(args.sequence)
    out, mask = degrade(u, spec)
    io.write_sequence(args.output, out, args.format, args.bits)
    io.write_mask(args.mask_output, mask)
    print(f"degraded_fraction: {degraded_fraction(mask)!r}")
    return EXIT_OK


def cmd_metrics(args):
    report = {}
    if args.restored or args.reference:
        _require(args, "restored", "reference")
        restored = io.read_sequence(args.restored)
        reference = io.read_sequence(args.reference)
        if restored.shape != reference.shape:
            raise DataError(f"{args.restored}: shape {restored.shape} differs from reference {reference.shape}")
        mask = io.read_mask(args.mask) if args.mask else None
        if mask is not None and mask.shape != reference.shape[:3]:
            raise DataError(f"{args.mask}: mask shape {mask.shape} does not match {reference.shape[:3]}")
        report.update(image_metrics(restored, reference, mask))
    if args.flow or args.flow_reference:
        _require(args, "flow", "flow_reference")
        est = io.read_flow(args.flow)
        ref = io.read_flow(args.flow_reference)
        if est.shape != ref.shape:
            raise DataError(f"{args.flow}: flow shape {est.shape} differs from reference {ref.shape}")
        report.update(flow_metrics(est, ref, args.border))
    if not report:
        raise UsageError("nothing to measure: give --restored/--reference and/or --flow/--flow-reference")
    text = format_report(report)
    if args.output:
        Path(args.output).write_text(text)
    sys.stdout.write(text)
    return EXIT_OK


def cmd_pyramid(args):
    cfg = _resolve_config(args)
    if args.print_config:
        sys.stdout.write(cfg.to_text())
        return EXIT_OK
    _require(args, "sequence", "output")
    u = io.read_sequence(args.sequence)
    mask = io.read_mask(args.mask) if args.mask else np.zeros(u.shape[:3], bool)
    if mask.shape != u.shape[:3]:
        raise DataError(f"{args.mask}: mask is {mask.shape}, sequence is {u.shape[:3]}")
    out = Path(args.output)
    for level in build_pyramid(u, mask, cfg.pyramid):
        io.write_sequence(out / f"level_{level.index}", level.image, args.format, args.bits)
        if args.mask:
            io.write_mask(out / f"level_{level.index}_mask", level.mask)
        print(f"level {level.index}: {level.image.shape[2]}x{level.image.shape[1]}")
    return EXIT_OK


def cmd_synth(args):
    common = dict(height=args.height, width=args.width, frames=args.frames, channels=args.channels, seed=args.seed)
    if args.kind == "translating":
        u, v, w = synth.translating_sequence(shift=tuple(args.shift), **common)
    elif args.kind == "rotating":
        u, v, w = synth.rotating_sequence(degrees=args.degrees, **common)
    else:
        u, v, w = synth.zooming_sequence(rate=args.rate, **common)
    out = Path(args.output)
    io.write_sequence(out / "frames", u, args.format, args.bits)
    io.write_flow(out / "forward_flow", v)
    io.write_flow(out / "backward_flow", w)
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser():
    parser = _Parser(prog="motioninpaint", description="Joint optical flow recovery and video inpainting.")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="more logging (repeatable)")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("inpaint", help="restore a sequence inside a mask")
    p.add_argument("sequence", nargs="?", type=Path, help="directory of input frames")
    p.add_argument("mask", nargs="?", type=Path, help="directory of mask frames (nonzero = missing)")
    p.add_argument("-o", "--output", type=Path, help="directory for the restored frames")
    p.add_argument("--forward-flow", type=Path, help="directory for the forward flow (.flo)")
    p.add_argument("--backward-flow", type=Path, help="directory for the backward flow (.flo)")
    p.add_argument("--trace", type=Path, help="energy trace file")
    _add_output_format(p)
    _add_config_options(p)
    p.set_defaults(func=cmd_inpaint)

    p = sub.add_parser("flow", help="estimate optical flow only")
    p.add_argument("sequence", nargs="?", type=Path)
    p.add_argument("-o", "--output", type=Path, help="directory for the forward flow")
    p.add_argument("--backward-flow", type=Path, help="directory for the backward flow")
    _add_config_options(p)
    p.set_defaults(func=cmd_flow)

    p = sub.add_parser("degrade", help="add random polygonal blotches and noise")
    p.add_argument("sequence", type=Path)
    p.add_argument("-o", "--output", type=Path, required=True)
    p.add_argument("--mask-output", type=Path, required=True)
    d = DegradationSpec()
    p.add_argument("--seed", type=int, default=d.seed)
    p.add_argument("--blotches", type=int, default=d.blotches, help="new blotches per frame")
    p.add_argument("--vertices", type=int, nargs=2, default=d.vertices, metavar=("MIN", "MAX"))
    p.add_argument("--size", type=float, nargs=2, default=d.size, metavar=("MIN", "MAX"),
                   help="polygon radius as a fraction of the smaller frame side")
    p.add_argument("--overlap", type=float, default=d.overlap, help="probability a blotch persists into the next frame")
    p.add_argument("--noise", type=float, default=d.noise, help="Gaussian noise stddev")
    p.add_argument("--fill", choices=("constant", "noise"), default=d.fill)
    p.add_argument("--fill-value", type=float, default=d.fill_value)
    _add_output_format(p)
    p.set_defaults(func=cmd_degrade)

    p = sub.add_parser("metrics", help="restoration and flow errors")
    p.add_argument("--restored", type=Path)
    p.add_argument("--reference", type=Path)
    p.add_argument("--mask", type=Path)
    p.add_argument("--flow", type=Path)
    p.add_argument("--flow-reference", type=Path)
    p.add_argument("--border", type=int, default=0, help="pixels trimmed from each side for flow errors")
    p.add_argument("-o", "--output", type=Path, help="also write the report here")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("pyramid", help="write every pyramid level")
    p.add_argument("sequence", nargs="?", type=Path)
    p.add_argument("--mask", type=Path)
    p.add_argument("-o", "--output", type=Path)
    _add_output_format(p)
    _add_config_options(p)
    p.set_defaults(func=cmd_pyramid)

    p = sub.add_parser("synth", help="synthetic sequence with ground-truth flows")
    p.add_argument("-o", "--output", type=Path, required=True)
    p.add_argument("--kind", choices=("translating", "rotating", "zooming"), default="translating")
    p.add_argument("--height", type=int, default=64)
    p.add_argument("--width", type=int, default=64)
    p.add_argument("--frames", type=int, default=8)
    p.add_argument("--channels", type=int, choices=(1, 3), default=1)
    p.add_argument("--shift", type=float, nargs=2, default=(1.0, 0.0), metavar=("DX", "DY"))
    p.add_argument("--degrees", type=float, default=2.0)
    p.add_argument("--rate", type=float, default=1.05)
    p.add_argument("--seed", type=int, default=0)
    _add_output_format(p)
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s"
    )
    try:
        return args.func(args)
    except (UsageError, ConfigError) as exc:
        print(f"motioninpaint: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalError as exc:
        print(f"motioninpaint: numerical abort: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DataError, OSError, ValueError) as exc:
        print(f"motioninpaint: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
