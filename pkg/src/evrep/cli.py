"""Command-line interface: convert, render, dataset, synth, and bench.

Every subcommand is deterministic given its flags and seed (timing fields
excluded). Exit codes: 0 success, 1 data error, 2 usage error.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .bench import bench_throughput
from .dataset import build_dataset, load_dataset_config, load_events
from .errors import EvrepError
from .formats import (
    AnnotationRecord,
    export_image,
    read_annotations_csv,
    write_annotations_csv,
    write_events_csv,
    write_events_evt1,
    write_yolo_labels,
)
from .events import SensorGeometry
from .representations import (
    DEFAULT_FUSION_ORDER,
    REP_FUSION,
    SINGLE_CHANNEL_KINDS,
    decaying_time_surface,
    event_frame,
    event_frequency,
    fuse,
    render_plane,
)
from .synth import MovingBarScenario, generate_moving_bar, moving_bar_truth
from .windowing import WindowConfig, stream_windows, window_index

REP_CHOICES = SINGLE_CHANNEL_KINDS + (REP_FUSION,)


def _geometry_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--width", type=int, default=1280,
                        help="sensor width in pixels for CSV inputs (default 1280)")
    parser.add_argument("--height", type=int, default=720,
                        help="sensor height in pixels for CSV inputs (default 720)")


def _scenario_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--bar-width", type=int, default=4,
                        help="bar width in pixels (default 4)")
    parser.add_argument("--velocity", type=float, default=1000.0,
                        help="bar velocity in px/s, sign is direction (default 1000)")
    parser.add_argument("--duration-us", type=int, default=100_000,
                        help="scenario length in microseconds (default 100000)")
    parser.add_argument("--events-per-edge", type=int, default=8,
                        help="events emitted per edge crossing (default 8)")
    parser.add_argument("--seed", type=int, default=0, help="noise seed (default 0)")
    parser.add_argument("--noise-rate", type=float, default=0.0,
                        help="uniform noise events per pixel per second (default 0)")


def _scenario_from_args(args) -> MovingBarScenario:
    return MovingBarScenario(
        geometry=SensorGeometry(args.width, args.height),
        bar_width=args.bar_width,
        velocity_px_s=args.velocity,
        duration_us=args.duration_us,
        events_per_edge=args.events_per_edge,
        seed=args.seed,
        noise_rate_hz_per_px=args.noise_rate,
    )


def cmd_convert(args) -> int:
    geometry = SensorGeometry(args.width, args.height)
    stream = load_events(args.input, geometry,
                         zero_polarity_negative=args.zero_polarity_negative)
    out = Path(args.output)
    if out.suffix == ".evt1":
        write_events_evt1(stream, out)
    elif out.suffix == ".csv":
        write_events_csv(stream, out)
    else:
        raise EvrepError(f"cannot infer output format from suffix {out.suffix!r}")
    print(f"wrote {len(stream)} events to {out}")
    return 0


def cmd_render(args) -> int:
    geometry = SensorGeometry(args.width, args.height)
    stream = load_events(args.events, geometry,
                         zero_polarity_negative=args.zero_polarity_negative)
    cfg = WindowConfig(args.tau, args.origin)
    reps = args.rep or [REP_FUSION]
    order = tuple(args.fusion_order.split(","))
    boxes_by_window: dict[int, list[AnnotationRecord]] = {}
    if args.annotations:
        for a in read_annotations_csv(args.annotations):
            boxes_by_window.setdefault(window_index(a.t, cfg), []).append(a)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    ext = ".png" if args.format == "png" else None
    n_images = 0
    for m in stream_windows(stream, cfg):
        k = (m.window_start - cfg.origin_us) // cfg.tau_us
        for rep in reps:
            if rep == REP_FUSION:
                planes = fuse(m, order).planes
                suffix = ext or ".ppm"
            else:
                planes = render_plane(m, rep)
                suffix = ext or ".pgm"
            export_image(planes, out_dir / f"{k}_{rep}{suffix}")
            n_images += 1
            if args.raw_float and rep != REP_FUSION:
                channel = {"frame": event_frame, "freq": event_frequency,
                           "decay": decaying_time_surface}[rep](m)
                np.save(out_dir / f"{k}_{rep}.npy", channel.values)
        if args.annotations:
            write_yolo_labels(boxes_by_window.get(k, []), geometry,
                              out_dir / f"{k}.txt")
    print(f"wrote {n_images} images to {out_dir}")
    return 0


def cmd_dataset(args) -> int:
    cfg = load_dataset_config(args.config)
    if args.jobs is not None:
        cfg.jobs = args.jobs
    manifest = build_dataset(cfg)
    n_train = sum(1 for r in manifest.records if r.split == "train")
    n_test = sum(1 for r in manifest.records if r.split == "test")
    print(f"records={len(manifest.records)} train={n_train} test={n_test} "
          f"sequences={len(manifest.sequences())}")
    return 0


def cmd_synth(args) -> int:
    sc = _scenario_from_args(args)
    stream = generate_moving_bar(sc)
    out = Path(args.output)
    if out.suffix == ".evt1":
        write_events_evt1(stream, out)
    elif out.suffix == ".csv":
        write_events_csv(stream, out)
    else:
        raise EvrepError(f"cannot infer output format from suffix {out.suffix!r}")
    if args.annotations_out:
        truth = moving_bar_truth(sc, WindowConfig(args.tau))
        boxes = []
        for k in sorted(truth):
            x, y, w, h = truth[k].box
            boxes.append(AnnotationRecord(t=k * args.tau, x=x, y=y, w=w, h=h,
                                          class_id=args.class_id, track_id=0,
                                          confidence=1.0))
        write_annotations_csv(boxes, args.annotations_out)
    print(f"wrote {len(stream)} events to {out}")
    return 0


def cmd_bench(args) -> int:
    if args.synthetic:
        stream = generate_moving_bar(_scenario_from_args(args))
    elif args.input:
        geometry = SensorGeometry(args.width, args.height)
        stream = load_events(args.input, geometry)
    else:
        raise EvrepError("bench needs an input file or --synthetic")
    report = bench_throughput(stream, WindowConfig(args.tau, args.origin),
                              jobs=args.jobs)
    print(report.format(), end="")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="evrep",
        description="Event-camera stream processing: windowed frame "
                    "representations and dataset curation.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("convert", help="transcode events between CSV and EVT1")
    p.add_argument("input", help="source .csv or .evt1 file")
    p.add_argument("output", help="destination .csv or .evt1 file")
    _geometry_args(p)
    p.add_argument("--zero-polarity-negative", action="store_true",
                   help="accept polarity 0 in CSV input and map it to -1")
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("render", help="write per-window representation images")
    p.add_argument("events", help="source .csv or .evt1 file")
    p.add_argument("out_dir", help="directory for images (and labels)")
    p.add_argument("--rep", action="append", choices=REP_CHOICES,
                   help="representation to render, repeatable (default fusion)")
    p.add_argument("--tau", type=int, default=10_000,
                   help="window length in microseconds (default 10000)")
    p.add_argument("--origin", type=int, default=0,
                   help="window phase anchor in microseconds (default 0)")
    p.add_argument("--annotations", help="annotation CSV; also emits YOLO labels")
    p.add_argument("--fusion-order", default=",".join(DEFAULT_FUSION_ORDER),
                   help="comma-separated plane order for fusion "
                        f"(default {','.join(DEFAULT_FUSION_ORDER)})")
    p.add_argument("--format", choices=("pnm", "png"), default="pnm",
                   help="image container (default pnm: PGM/PPM)")
    p.add_argument("--raw-float", action="store_true",
                   help="also dump single-channel planes as float64 .npy")
    p.add_argument("--zero-polarity-negative", action="store_true",
                   help="accept polarity 0 in CSV input and map it to -1")
    _geometry_args(p)
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("dataset", help="run the full curation pipeline")
    p.add_argument("config", help="key=value config file")
    p.add_argument("--jobs", type=int, default=None,
                   help="sequence-level parallelism (default from config, 1)")
    p.set_defaults(func=cmd_dataset)

    p = sub.add_parser("synth", help="generate a moving-bar event stream")
    p.add_argument("output", help="destination .csv or .evt1 file")
    _geometry_args(p)
    _scenario_args(p)
    p.add_argument("--annotations-out",
                   help="also write per-window ground-truth boxes as annotation CSV")
    p.add_argument("--tau", type=int, default=10_000,
                   help="window length for --annotations-out (default 10000)")
    p.add_argument("--class-id", type=int, default=0,
                   help="class id for ground-truth boxes (default 0)")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("bench", help="measure pipeline throughput")
    p.add_argument("input", nargs="?", help="source .csv or .evt1 file")
    p.add_argument("--synthetic", action="store_true",
                   help="benchmark a generated moving-bar stream")
    p.add_argument("--tau", type=int, default=10_000,
                   help="window length in microseconds (default 10000)")
    p.add_argument("--origin", type=int, default=0,
                   help="window phase anchor in microseconds (default 0)")
    p.add_argument("--jobs", type=int, default=1,
                   help="per-window parallelism (default 1)")
    _geometry_args(p)
    _scenario_args(p)
    p.set_defaults(func=cmd_bench)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (EvrepError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
