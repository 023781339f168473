"""Acceptance criteria A1-A10, one PASS/FAIL line each (see the summary section)."""
import itertools
import math

import numpy as np
import pytest

from maptrack import kalman, synth
from maptrack.association import solve_assignment
from maptrack.geometry import BoundingBox, ioi, iou
from maptrack.kalman import NoiseConfig
from maptrack.metrics import evaluate_frames, rows_to_frames
from maptrack.scenarios import (
    ca_comparison,
    evaluate_results,
    ids_for_agent,
    result_text,
    track_preset,
)


def test_a1_occlusion_identity(report_line):
    seq = synth.generate(synth.preset("S1"))
    res, seconds = track_preset(seq)
    rep = evaluate_results(seq, res)
    base = evaluate_results(seq, track_preset(seq, mode="baseline")[0])
    occluded = rep.per_gt[1]
    ok = occluded["idsw"] == 0 and occluded["idf1"] == 1.0 and rep.idsw == 0 and base.idsw >= 1 and seconds < 1.0
    detail = (
        f"maptrack idsw={occluded['idsw']} idf1={occluded['idf1']:.3f}, "
        f"baseline idsw={base.idsw}, runtime {seconds:.3f}s"
    )
    assert report_line("A1", ok, detail), detail


def test_a2_deformation_robustness(report_line):
    ca, flat = ca_comparison()
    again = ca_comparison()
    reduction = 1 - ca / flat
    ok = reduction >= 0.30 and again == (ca, flat)
    detail = f"max center deviation {ca:.2f}px with CA vs {flat:.2f}px flat ({reduction:.0%} smaller)"
    assert report_line("A2", ok, detail), detail


def test_a3_reidentification(report_line):
    seq = synth.generate(synth.preset("S3"))
    with_emb = sorted({h for _, h in ids_for_agent(seq, track_preset(seq)[0], 0)})
    without = sorted({h for _, h in ids_for_agent(seq, track_preset(seq, embeddings=False)[0], 0)})
    ok = len(with_emb) == 1 and len(without) >= 2
    detail = f"ids of returning agent with embeddings={with_emb}, motion-only={without}"
    assert report_line("A3", ok, detail), detail


def brute_force(cost):
    n, m = cost.shape
    if n <= m:
        return min(math.fsum(cost[i, p[i]] for i in range(n)) for p in itertools.permutations(range(m), n))
    return min(math.fsum(cost[p[j], j] for j in range(m)) for p in itertools.permutations(range(n), m))


def test_a4_assignment_optimality(report_line):
    rng = np.random.default_rng(2024)
    mismatches = 0
    for k in range(500):
        n, m = rng.integers(1, 8, 2)
        # every fourth matrix has small integer costs so exact ties occur
        cost = rng.integers(0, 4, (n, m)).astype(float) if k % 4 == 0 else rng.uniform(0, 10, (n, m))
        matches, _, _ = solve_assignment(cost)
        assert len(matches) == min(n, m)
        total = math.fsum(cost[r, c] for r, c in matches)
        mismatches += total != brute_force(cost)
    ok = mismatches == 0
    detail = f"500 matrices up to 7x7, {mismatches} differ from the permutation minimum"
    assert report_line("A4", ok, detail), detail


def test_a5_geometry_oracle(report_line):
    rng = np.random.default_rng(5)
    canvas = 200
    ys, xs = np.mgrid[0:canvas, 0:canvas]

    def mask(b):
        return (xs >= b.left) & (xs < b.right) & (ys >= b.top) & (ys < b.bottom)

    worst = 0.0
    for _ in range(1000):
        # integer pixel boxes of at least 20x20 so each pixel is wholly in or out
        a, b = (
            BoundingBox(*rng.integers(0, 100, 2).astype(float), *rng.integers(20, 100, 2).astype(float))
            for _ in range(2)
        )
        ma, mb = mask(a), mask(b)
        inter = int((ma & mb).sum())
        union = int((ma | mb).sum())
        pairs = [(iou(a, b), inter / union), (ioi(a, b), inter / int(ma.sum())), (ioi(b, a), inter / int(mb.sum()))]
        for got, want in pairs:
            err = abs(got - want) / want if want else abs(got)
            worst = max(worst, err)
    ok = worst <= 0.02
    detail = f"1000 pairs, worst relative error {worst:.2e}"
    assert report_line("A5", ok, detail), detail


A6_TABLE = {
    0.5: (15, 9),
    0.6: (9, 6),
    0.65: (9, 6),
    0.7: (6, 3),
    0.75: (6, 3),
    0.8: (1, 1),
    1.0: (1, 1),
    1.2: (1, 1),
    1.25: (6, 3),
    1.3: (6, 3),
    1.35: (9, 6),
    1.4: (9, 6),
    1.5: (15, 9),
}


def test_a6_band_table(report_line):
    wrong = [
        (d, cls)
        for d, expected in A6_TABLE.items()
        for cls, want in zip(("normal", "predicted"), expected)
        if kalman.covariance_multiplier(d, cls) != want
    ]
    ok = not wrong
    detail = f"{2 * len(A6_TABLE)} table entries, mismatches {wrong}"
    assert report_line("A6", ok, detail), detail


def test_a7_velocity_convergence(report_line):
    noise = NoiseConfig(beta=0.9)
    true_v = np.array([2.0, -1.5])
    v = np.zeros(2)
    pos = np.zeros(2)
    for _ in range(50):
        v = kalman.smooth_velocity(v, pos, pos + true_v, noise)
        pos = pos + true_v
    rel = np.linalg.norm(v - true_v) / np.linalg.norm(true_v)
    bound = noise.beta**50
    ok = rel < 0.01 and math.isclose(rel, bound, rel_tol=1e-9)
    detail = f"relative error after 50 frames {rel:.5f} (geometric bound 0.9^50 = {bound:.5f})"
    assert report_line("A7", ok, detail), detail


def _track(tid, frames):
    return [(f, tid, (100.0 + 5 * f, 50.0, 40.0, 100.0)) for f in frames]


def test_a8_metrics_oracle(report_line):
    gt = rows_to_frames(_track(1, range(1, 11)))
    cases = {
        "perfect": (rows_to_frames(_track(1, range(1, 11))), dict(mota=1.0, idf1=1.0, idsw=0, frag=0)),
        "all-miss": ({}, dict(mota=0.0, idf1=0.0, idsw=0, frag=0, fn=10)),
        "id-switch": (
            rows_to_frames(_track(7, range(1, 6)) + _track(8, range(6, 11))),
            dict(mota=0.9, idf1=0.5, idsw=1, frag=0),
        ),
    }
    bad = []
    for name, (hyp, expected) in cases.items():
        d = evaluate_frames(gt, hyp)
        got = {k: getattr(d, k) for k in expected}
        if any(not math.isclose(got[k], v, abs_tol=1e-12) for k, v in expected.items()):
            bad.append((name, got))
    ok = not bad
    detail = f"{len(cases)} crafted sequences, mismatches {bad}"
    assert report_line("A8", ok, detail), detail


@pytest.mark.parametrize("truncate_at", [37])
def test_a9_determinism_and_online(report_line, truncate_at):
    problems = []
    for name in ("S1", "S2", "S3", "S4"):
        seq = synth.generate(synth.preset(name))
        full = result_text(track_preset(seq)[0])
        if full != result_text(track_preset(seq)[0]):
            problems.append(f"{name} not repeatable")
        head = result_text(track_preset(seq, frame_limit=truncate_at)[0])
        expected = "".join(line + "\n" for line in full.splitlines() if int(line.split(",")[0]) <= truncate_at)
        if head != expected:
            problems.append(f"{name} truncated run differs")
    ok = not problems
    detail = f"S1-S4 byte-identical reruns and prefix at frame {truncate_at}; problems {problems}"
    assert report_line("A9", ok, detail), detail


def test_a10_throughput(report_line):
    seq = synth.generate(synth.preset("dense-20"))
    results, seconds = track_preset(seq)
    fps = seq.spec.frame_count / seconds
    mota = evaluate_results(seq, results).mota
    ok = fps > 200
    detail = f"20 agents x 1000 frames in {seconds:.2f}s = {fps:.0f} frames/s (MOTA {mota:.3f})"
    # reported, not fatal: a slow machine gets a FLAG line instead of a failure
    report_line("A10", ok, detail, flag=None if ok else "FLAG")
    assert len(results) == seq.spec.frame_count
