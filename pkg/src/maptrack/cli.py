"""Command-line entry point: ``maptrack {track,eval,synth,selfcheck}``.

Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
import time
from pathlib import Path

from . import metrics, synth
from .io_formats import (
    FormatError,
    read_config,
    read_embeddings,
    read_mot_detections,
    read_raw_counts,
    read_seqinfo,
    write_mot_results,
)
from .pipeline import PipelineConfig, flatten_results, make_tracker, run_sequence

log = logging.getLogger("maptrack")


def _cmd_track(args) -> int:
    if args.seqinfo:
        meta = read_seqinfo(args.seqinfo)
        width, height, frame_count = meta.frame_width, meta.frame_height, meta.frame_count
    else:
        width, height, frame_count = None, None, 0
    # flags win over the seqinfo file
    width = args.width or width
    height = args.height or height
    if not width or not height:
        print("error: frame size unknown; pass --seqinfo or --width and --height", file=sys.stderr)
        return 2

    config = read_config(args.config) if args.config else PipelineConfig()
    if args.min_conf is not None:
        config = dataclasses.replace(config, min_confidence=args.min_conf)

    embeddings = None
    if args.emb:
        if Path(args.emb).exists():
            embeddings = read_embeddings(args.emb, read_raw_counts(args.det))
        else:
            log.warning("embedding sidecar %s not found; running motion-only", args.emb)
    frames = read_mot_detections(args.det, config.min_confidence, embeddings)

    tracker = make_tracker((width, height), config, args.mode)
    t0 = time.perf_counter()
    results = run_sequence(frames, (width, height), config, frame_count=frame_count, tracker=tracker)
    elapsed = time.perf_counter() - t0
    rows = flatten_results(results)
    write_mot_results(args.out, rows)

    if args.dump_maps and hasattr(tracker, "dump_maps"):
        out = Path(args.dump_maps)
        out.mkdir(parents=True, exist_ok=True)
        for name, text in tracker.dump_maps().items():
            (out / f"{name}_map.txt").write_text(text + "\n", encoding="utf-8")

    n_frames = len(results)
    fps = n_frames / elapsed if elapsed > 0 else float("inf")
    print(f"frames={n_frames} tracks={len({r[1] for r in rows})} time={elapsed:.3f}s fps={fps:.1f}")
    return 0


def _cmd_eval(args) -> int:
    report = metrics.evaluate(args.gt, args.res, args.iou)
    print(metrics.format_report(report, machine=args.kv))
    return 0


def _spec_from_json(path) -> synth.ScenarioSpec:
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    agents = [
        synth.Agent(
            waypoints=[tuple(w) for w in a["waypoints"]],
            size=tuple(a.get("size", (40.0, 100.0))),
            seed_vector=a.get("seed_vector"),
        )
        for a in raw.pop("agents", [])
    ]
    if "frame_size" in raw:
        raw["frame_size"] = tuple(raw["frame_size"])
    for key in ("occlusion_windows", "deformation_windows"):
        if key in raw:
            raw[key] = [tuple(w) for w in raw[key]]
    return synth.ScenarioSpec(agents=agents, **raw)


def _cmd_synth(args) -> int:
    spec = synth.preset(args.preset) if args.preset else _spec_from_json(args.spec)
    if args.seed is not None:
        spec = dataclasses.replace(spec, rng_seed=args.seed)
    paths = synth.generate(spec).write(args.out)
    for kind, path in paths.items():
        print(f"{kind}: {path}")
    return 0


def _cmd_selfcheck(args) -> int:
    from .scenarios import selfcheck

    failed = 0
    for name, ok, detail in selfcheck():
        print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
        failed += not ok
    return 1 if failed else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="maptrack", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("track", help="track detections and write MOT results")
    p.add_argument("--det", required=True, help="MOT detection file")
    p.add_argument("--emb", help="embedding sidecar; omit for motion-only tracking")
    p.add_argument("--seqinfo", help="seqinfo.ini with frame size and length")
    p.add_argument("--width", type=int)
    p.add_argument("--height", type=int)
    p.add_argument("--config", help="key = value config file")
    p.add_argument("--min-conf", type=float, default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--mode", choices=("maptrack", "baseline"), default="maptrack")
    p.add_argument("--dump-maps", metavar="DIR", help="write final probability/prediction maps as text")
    p.set_defaults(func=_cmd_track)

    p = sub.add_parser("eval", help="MOTA / IDF1 / IDSW / Frag of a result file")
    p.add_argument("--gt", required=True)
    p.add_argument("--res", required=True)
    p.add_argument("--iou", type=float, default=0.5)
    p.add_argument("--kv", action="store_true", help="machine-readable key=value output")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("synth", help="generate a synthetic sequence")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--preset", choices=sorted(synth.PRESETS) + sorted(synth.ALIASES))
    src.add_argument("--spec", help="JSON scenario file")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("selfcheck", help="run the built-in scenario checks")
    p.set_defaults(func=_cmd_selfcheck)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (FormatError, ValueError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
