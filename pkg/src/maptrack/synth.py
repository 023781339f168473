"""Deterministic synthetic scenes: ground truth, corrupted detections, embeddings.

Agents move along piecewise-linear paths. Detections are derived from the
ground truth by adding jitter, suppressing occlusion windows, shrinking or
growing boxes inside deformation windows, and sprinkling false positives.
Each agent owns a random unit seed vector; its per-frame embeddings are the
seed plus Gaussian noise, renormalized.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .geometry import BoundingBox
from .io_formats import Detection, FrameDetections, SequenceMeta, write_embeddings, write_seqinfo


@dataclass
class Agent:
    # (frame, cx, cy) keyframes, frames strictly increasing
    waypoints: list[tuple[int, float, float]]
    size: tuple[float, float] = (40.0, 100.0)
    seed_vector: np.ndarray | None = None


@dataclass
class ScenarioSpec:
    frame_size: tuple[int, int] = (640, 480)
    frame_count: int = 100
    agents: list[Agent] = field(default_factory=list)
    # (agent, first_frame, last_frame), inclusive
    occlusion_windows: list[tuple[int, int, int]] = field(default_factory=list)
    # (agent, first_frame, last_frame, area_factor[, anchor]), inclusive; anchor is
    # "center" (default) or "top", the latter modelling an upper-body-only detection
    deformation_windows: list[tuple] = field(default_factory=list)
    jitter_std: float = 0.0
    embedding_noise_std: float = 0.05
    embedding_dim: int = 32
    false_positive_rate: float = 0.0
    rng_seed: int = 0

    def __post_init__(self):
        W, H = self.frame_size
        for k, agent in enumerate(self.agents):
            frames = [w[0] for w in agent.waypoints]
            if not frames or any(b <= a for a, b in zip(frames, frames[1:])):
                raise ValueError(f"agent {k}: waypoint frames must be strictly increasing")
            if frames[0] < 1 or frames[-1] > self.frame_count:
                raise ValueError(f"agent {k}: waypoints outside 1..{self.frame_count}")
        for win in list(self.occlusion_windows) + list(self.deformation_windows):
            if not (0 <= win[0] < len(self.agents) and 1 <= win[1] <= win[2] <= self.frame_count):
                raise ValueError(f"bad window {win}")
        for win in self.deformation_windows:
            if win[3] <= 0 or (len(win) > 4 and win[4] not in ("center", "top")):
                raise ValueError(f"bad deformation window {win}")


@dataclass
class SyntheticSequence:
    spec: ScenarioSpec
    gt: list[tuple[int, int, BoundingBox]]
    detections: list[FrameDetections]
    embeddings: dict[int, np.ndarray]
    # per detection row: agent index, or -1 for a false positive
    det_agents: dict[int, list[int]]

    @property
    def meta(self) -> SequenceMeta:
        W, H = self.spec.frame_size
        return SequenceMeta(W, H, self.spec.frame_count, 30.0)

    def gt_text(self) -> str:
        return "".join(
            f"{f},{i},{b.left:.2f},{b.top:.2f},{b.width:.2f},{b.height:.2f},1,1,1\n" for f, i, b in self.gt
        )

    def det_text(self) -> str:
        lines = []
        for fd in self.detections:
            for d in fd.entries:
                b = d.box
                lines.append(
                    f"{fd.frame},-1,{b.left:.2f},{b.top:.2f},{b.width:.2f},{b.height:.2f},{d.confidence:.2f},-1,-1,-1\n"
                )
        return "".join(lines)

    def write(self, directory) -> dict[str, Path]:
        out = Path(directory)
        out.mkdir(parents=True, exist_ok=True)
        paths = {
            "gt": out / "gt.txt",
            "det": out / "det.txt",
            "emb": out / "emb.bin",
            "seqinfo": out / "seqinfo.ini",
        }
        paths["gt"].write_text(self.gt_text(), encoding="utf-8")
        paths["det"].write_text(self.det_text(), encoding="utf-8")
        # descriptors go through float32 in the sidecar, as they would in a real pipeline
        write_embeddings(paths["emb"], self.embeddings)
        write_seqinfo(paths["seqinfo"], self.meta)
        return paths

    def frames_with_embeddings(self) -> list[FrameDetections]:
        return [
            FrameDetections(fd.frame, [Detection(d.box, d.confidence, v) for d, v in zip(fd.entries, self.embeddings[fd.frame])])
            for fd in self.detections
        ]


def agent_center(agent: Agent, frame: int) -> tuple[float, float] | None:
    """Interpolated center at ``frame``, or None outside the agent's lifetime."""
    wp = agent.waypoints
    if frame < wp[0][0] or frame > wp[-1][0]:
        return None
    for (f0, x0, y0), (f1, x1, y1) in zip(wp, wp[1:]):
        if f0 <= frame <= f1:
            a = (frame - f0) / (f1 - f0)
            return (x0 + a * (x1 - x0), y0 + a * (y1 - y0))
    return (wp[0][1], wp[0][2])


def _visible(cx: float, cy: float, frame_size) -> bool:
    W, H = frame_size
    return 0.0 <= cx < W and 0.0 <= cy < H


def _snap(box: BoundingBox) -> BoundingBox:
    # files carry 2 decimals; keep in-memory data identical to what a reader sees
    return BoundingBox(round(box.left, 2), round(box.top, 2), round(box.width, 2), round(box.height, 2))


def generate(spec: ScenarioSpec) -> SyntheticSequence:
    rng = np.random.default_rng(spec.rng_seed)
    D = spec.embedding_dim
    seeds = []
    for agent in spec.agents:
        if agent.seed_vector is not None:
            v = np.asarray(agent.seed_vector, float)
        else:
            v = rng.normal(size=D)
        seeds.append(v / np.linalg.norm(v))

    occluded = {(a, f) for a, s, e in spec.occlusion_windows for f in range(s, e + 1)}
    deform = {}
    for a, s, e, factor, *anchor in spec.deformation_windows:
        for f in range(s, e + 1):
            deform[(a, f)] = (factor, anchor[0] if anchor else "center")

    W, H = spec.frame_size
    gt, frames, embeddings, det_agents = [], [], {}, {}
    for frame in range(1, spec.frame_count + 1):
        entries, vecs, owners = [], [], []
        for k, agent in enumerate(spec.agents):
            c = agent_center(agent, frame)
            if c is None or not _visible(c[0], c[1], spec.frame_size):
                continue
            w, h = agent.size
            gt.append((frame, k + 1, _snap(BoundingBox.from_center(c[0], c[1], w, h))))
            if (k, frame) in occluded:
                continue
            factor, anchor = deform.get((k, frame), (1.0, "center"))
            scale = np.sqrt(factor)
            jitter = rng.normal(scale=spec.jitter_std, size=4) if spec.jitter_std > 0 else np.zeros(4)
            dw = max(w * scale + jitter[2], 1.0)
            dh = max(h * scale + jitter[3], 1.0)
            cy = c[1] if anchor == "center" else c[1] - h / 2.0 + h * scale / 2.0
            box = BoundingBox.from_center(c[0] + jitter[0], cy + jitter[1], dw, dh)
            entries.append(Detection(_snap(box), 1.0))
            vecs.append(seeds[k] + rng.normal(scale=spec.embedding_noise_std, size=D))
            owners.append(k)
        n_fp = rng.poisson(spec.false_positive_rate) if spec.false_positive_rate > 0 else 0
        for _ in range(n_fp):
            w = rng.uniform(20, 60)
            h = rng.uniform(50, 140)
            box = BoundingBox(rng.uniform(0, W - w), rng.uniform(0, H - h), w, h)
            entries.append(Detection(_snap(box), float(np.round(rng.uniform(0.3, 0.9), 2))))
            vecs.append(rng.normal(size=D))
            owners.append(-1)
        if entries:
            v = np.array(vecs)
            v = (v / np.linalg.norm(v, axis=1, keepdims=True)).astype(np.float32).astype(np.float64)
            embeddings[frame] = v / np.linalg.norm(v, axis=1, keepdims=True)
            frames.append(FrameDetections(frame, entries))
            det_agents[frame] = owners
    return SyntheticSequence(spec, gt, frames, embeddings, det_agents)


# -- presets ------------------------------------------------------------------


def occlusion_5() -> ScenarioSpec:
    """Two walkers cross; the one behind is undetected for 5 frames at the crossing."""
    return ScenarioSpec(
        frame_size=(640, 480),
        frame_count=120,
        agents=[
            Agent([(1, 80.0, 240.0), (120, 560.0, 240.0)], (40.0, 100.0)),
            Agent([(1, 560.0, 250.0), (120, 80.0, 250.0)], (44.0, 110.0)),
        ],
        occlusion_windows=[(0, 58, 62)],
        jitter_std=0.5,
        rng_seed=1,
    )


def crowd_cross() -> ScenarioSpec:
    """Two walkers pass each other while their detections flicker to upper-body boxes.

    During the overlap every other detection of both walkers keeps its top edge
    but shrinks to 65% of the true area, so its center is biased upwards.
    """
    deformation = [(a, f, f, 0.65, "top") for a in (0, 1) for f in range(54, 68, 2)]
    return ScenarioSpec(
        frame_size=(640, 480),
        frame_count=120,
        agents=[
            Agent([(1, 80.0, 210.0), (120, 560.0, 210.0)], (50.0, 120.0)),
            Agent([(1, 560.0, 280.0), (120, 80.0, 280.0)], (50.0, 120.0)),
        ],
        deformation_windows=deformation,
        jitter_std=0.5,
        rng_seed=2,
    )


def exit_reenter() -> ScenarioSpec:
    """A walker leaves through the right edge and comes back 30 frames later."""
    return ScenarioSpec(
        frame_size=(640, 480),
        frame_count=160,
        agents=[
            Agent(
                [(1, 440.0, 240.0), (50, 685.0, 240.0), (80, 685.0, 240.0), (160, 285.0, 240.0)],
                (40.0, 100.0),
            ),
            Agent([(1, 150.0, 120.0), (160, 150.0, 380.0)], (40.0, 100.0)),
        ],
        jitter_std=0.5,
        rng_seed=3,
    )


def static_crowd() -> ScenarioSpec:
    """Five near-static, mutually overlapping walkers."""
    xs = [250.0, 280.0, 310.0, 340.0, 370.0]
    ys = [230.0, 250.0, 235.0, 255.0, 240.0]
    agents = [
        Agent([(1, x, y), (100, x + (-1) ** k * 8.0, y + 4.0)], (40.0, 100.0))
        for k, (x, y) in enumerate(zip(xs, ys))
    ]
    return ScenarioSpec(frame_size=(640, 480), frame_count=100, agents=agents, jitter_std=1.0, rng_seed=4)


def dense(n_agents: int = 20, frame_count: int = 1000, seed: int = 5) -> ScenarioSpec:
    """Many walkers on random straight paths, entering and leaving; for throughput runs."""
    rng = np.random.default_rng(seed)
    W, H = 1280, 720
    agents = []
    for _ in range(n_agents):
        start = int(rng.integers(1, frame_count // 2))
        end = int(rng.integers(start + frame_count // 4, frame_count + 1))
        p0 = rng.uniform([50, 100], [W - 50, H - 100])
        p1 = rng.uniform([50, 100], [W - 50, H - 100])
        h = rng.uniform(80, 140)
        agents.append(Agent([(start, *p0), (end, *p1)], (0.4 * h, h)))
    return ScenarioSpec(
        frame_size=(W, H),
        frame_count=frame_count,
        agents=agents,
        jitter_std=1.5,
        false_positive_rate=0.3,
        rng_seed=seed,
    )


PRESETS = {
    "S1": occlusion_5,
    "S2": crowd_cross,
    "S3": exit_reenter,
    "S4": static_crowd,
    "dense-20": dense,
}
ALIASES = {"occlusion-5": "S1", "crowd-cross": "S2", "exit-reenter": "S3", "static-crowd": "S4"}


def preset(name: str) -> ScenarioSpec:
    key = ALIASES.get(name, name)
    if key not in PRESETS:
        raise KeyError(f"unknown preset {name!r}; choose from {sorted(PRESETS) + sorted(ALIASES)}")
    return PRESETS[key]()
