"""Run the tracker on synthetic presets and measure the quantities the checks need."""
from __future__ import annotations

import dataclasses
import time

import numpy as np

from . import metrics, synth
from .geometry import centers, iou_matrix
from .io_formats import format_results
from .kalman import NoiseConfig
from .pipeline import PipelineConfig, flatten_results, run_sequence

FLAT_NOISE = NoiseConfig(coef1=1, coef2=1, coef3=1, pred_coef1=1, pred_coef2=1, pred_coef3=1)


def track_preset(seq: synth.SyntheticSequence, config=None, mode="maptrack", embeddings=True, frame_limit=None):
    frames = seq.frames_with_embeddings() if embeddings else seq.detections
    frame_count = seq.spec.frame_count
    if frame_limit is not None:
        frames = [f for f in frames if f.frame <= frame_limit]
        frame_count = frame_limit
    t0 = time.perf_counter()
    results = run_sequence(frames, seq.spec.frame_size, config, mode=mode, frame_count=frame_count)
    return results, time.perf_counter() - t0


def evaluate_results(seq: synth.SyntheticSequence, results) -> metrics.EvalReport:
    return metrics.evaluate_frames(metrics.rows_to_frames(seq.gt), metrics.rows_to_frames(flatten_results(results)))


def result_text(results) -> str:
    return format_results(flatten_results(results))


def ids_for_agent(seq: synth.SyntheticSequence, results, agent: int, iou_threshold: float = 0.5) -> list[tuple[int, int]]:
    """``(frame, hyp_id)`` for each frame where the agent's GT box is covered by some output."""
    report = evaluate_results(seq, results)
    gid = agent + 1
    return [(f, h) for f, pairs in sorted(report.frame_matches.items()) for g, h in pairs if g == gid]


def max_center_deviation(seq: synth.SyntheticSequence, results, frames) -> float:
    """Largest distance between a GT center and its best-overlapping output box over ``frames``."""
    gt = metrics.rows_to_frames(seq.gt)
    out = dict(results)
    worst = 0.0
    for f in frames:
        g = np.array([b for _, b in gt.get(f, [])]).reshape(-1, 4)
        h = np.array([b.to_array() for _, b in out.get(f, [])]).reshape(-1, 4)
        if len(g) == 0:
            continue
        if len(h) == 0:
            return float("inf")
        best = iou_matrix(g, h).argmax(axis=1)
        dist = np.linalg.norm(centers(g) - centers(h[best]), axis=1)
        worst = max(worst, float(dist.max()))
    return worst


def deformation_frames(spec: synth.ScenarioSpec) -> range:
    wins = spec.deformation_windows
    return range(min(w[1] for w in wins), max(w[2] for w in wins) + 1)


def ca_comparison(seed: int | None = None) -> tuple[float, float]:
    """Max center deviation on S2 with the adaptive covariance and with f = 1."""
    spec = synth.crowd_cross()
    if seed is not None:
        spec = dataclasses.replace(spec, rng_seed=seed)
    seq = synth.generate(spec)
    window = deformation_frames(spec)
    with_ca, _ = track_preset(seq, PipelineConfig())
    without, _ = track_preset(seq, PipelineConfig(noise=FLAT_NOISE))
    return max_center_deviation(seq, with_ca, window), max_center_deviation(seq, without, window)


def selfcheck() -> list[tuple[str, bool, str]]:
    """Quick scenario checks: ``(name, passed, detail)`` per line."""
    lines = []

    seq = synth.generate(synth.preset("S1"))
    res, dt = track_preset(seq)
    rep = evaluate_results(seq, res)
    base = evaluate_results(seq, track_preset(seq, mode="baseline")[0])
    ok = rep.idsw == 0 and rep.per_gt[1]["idf1"] == 1.0 and base.idsw >= 1 and dt < 1.0
    lines.append(("occlusion", ok, f"idsw={rep.idsw} idf1={rep.per_gt[1]['idf1']:.3f} baseline_idsw={base.idsw} {dt:.3f}s"))

    ca, flat = ca_comparison()
    lines.append(("deformation", ca <= 0.7 * flat, f"max_dev ca={ca:.2f}px flat={flat:.2f}px"))

    seq = synth.generate(synth.preset("S3"))
    with_emb = {h for _, h in ids_for_agent(seq, track_preset(seq)[0], 0)}
    no_emb = {h for _, h in ids_for_agent(seq, track_preset(seq, embeddings=False)[0], 0)}
    lines.append(("re-entry", len(with_emb) == 1 and len(no_emb) >= 2, f"ids with emb={sorted(with_emb)} without={sorted(no_emb)}"))

    seq = synth.generate(synth.preset("dense-20"))
    res, dt = track_preset(seq)
    fps = seq.spec.frame_count / dt
    lines.append(("throughput", fps > 200, f"{fps:.0f} frames/s"))
    return lines
