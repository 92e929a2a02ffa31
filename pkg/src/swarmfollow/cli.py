"""Command-line entry point: ``run``, ``compare`` and ``imgproc`` subcommands."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import imaging
from .config import ConfigError, Scenario, load_scenario_file
from .harness import compare_architectures, run_scenario, write_outputs, write_report
from .perception import FRESH_STATES, TrackerConfig, render_hud, track_frame

log = logging.getLogger("swarmfollow")


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _ints(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc


def _bounds(text: str) -> imaging.HsvBounds:
    """Parse ``h,s,v,h,s,v`` or ``h,s,v:h,s,v`` into HSV bounds."""
    vals = _ints(text.replace(":", ",").replace(";", ","))
    if len(vals) != 6:
        raise argparse.ArgumentTypeError("bounds need six integers: lo_h,lo_s,lo_v,hi_h,hi_s,hi_v")
    try:
        return imaging.HsvBounds(tuple(vals[:3]), tuple(vals[3:]))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def _scenario(path) -> Scenario:
    return Scenario() if path is None else load_scenario_file(path)


def cmd_run(args) -> int:
    s = _scenario(args.config)
    if args.seed is not None:
        s = s.with_(seed=args.seed)
    out = Path(args.out)
    result = run_scenario(s, dump_dir=out / "frames" if args.dump_frames else None)
    paths = write_outputs(result, out)
    log.info("wrote %s and %s", paths["metrics"], paths["summary"])
    print(json.dumps(result.summary, indent=2, sort_keys=True))
    return 0


def cmd_compare(args) -> int:
    s = _scenario(args.config)
    seeds = args.seeds if args.seeds is not None else [args.seed if args.seed is not None else s.seed]
    rows = compare_architectures(
        s, args.loss_grid, args.latency_grid, seeds,
        progress=lambda r: log.info("loss=%s latency=%s %s seed=%s rms=%.4f", r["loss"], r["latency_s"],
                                    r["mode"], r["seed"], r["rms_tracking_error"] or float("nan")))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_report(rows, out / "report.csv")
    print(out / "report.csv")
    return 0


def cmd_imgproc(args) -> int:
    img = imaging.read_netpbm(args.inp)
    bounds = args.bounds or imaging.HsvBounds()
    if args.op == "blur":
        out = imaging.gaussian_blur_5x5(img)
    elif args.op == "hsv":
        out = imaging.rgb_to_hsv(_rgb(img))
    elif args.op == "mask":
        out = imaging.segment(_rgb(img), bounds).astype(np.uint8) * 255
    else:
        cfg = TrackerConfig(bounds=bounds)
        cmd, hud, _ = track_frame(_rgb(img), cfg, FRESH_STATES, 1 / 30, 0.0)
        out = render_hud(_rgb(img), hud)
        print(json.dumps({"locked": hud.target_locked,
                          "circle": None if hud.circle is None else
                          [*hud.circle.center, hud.circle.radius],
                          "offset": hud.offset_vector, "command": cmd.as_dict()}))
    imaging.write_netpbm(args.out, out)
    return 0


def _rgb(img: np.ndarray) -> np.ndarray:
    if img.ndim != 3 or img.shape[2] != 3:
        raise ValueError("operation needs an RGB (P6) image")
    return img


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="swarmfollow", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="simulate one scenario and write metrics")
    r.add_argument("--config", help="scenario JSON (defaults used when omitted)")
    r.add_argument("--seed", type=int)
    r.add_argument("--out", required=True)
    r.add_argument("--dump-frames", action="store_true", help="write HUD frames, depth maps and hud.csv")
    r.set_defaults(func=cmd_run)

    c = sub.add_parser("compare", help="sweep channel loss/latency for both architectures")
    c.add_argument("--config")
    c.add_argument("--loss-grid", type=_floats, default=[0.0, 0.25, 0.5])
    c.add_argument("--latency-grid", type=_floats, default=[0.0, 0.1, 0.2])
    c.add_argument("--seed", type=int)
    c.add_argument("--seeds", type=_ints, help="comma-separated seeds; overrides --seed")
    c.add_argument("--out", required=True)
    c.set_defaults(func=cmd_compare)

    i = sub.add_parser("imgproc", help="run one pipeline stage on a PPM frame")
    i.add_argument("--in", dest="inp", required=True)
    i.add_argument("--op", choices=("blur", "hsv", "mask", "track"), required=True)
    i.add_argument("--bounds", type=_bounds)
    i.add_argument("--out", required=True)
    i.set_defaults(func=cmd_imgproc)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
