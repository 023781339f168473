"""MOT-Challenge text files, the binary embedding sidecar, and config files.

Embedding sidecar layout (all little-endian)::

    magic        4 bytes  b"MTE1"
    dim          uint32   descriptor length D
    rows         uint32   number of rows
    rows x { frame uint32, index uint32, D x float32 }

``index`` is the 0-based position of the detection among the *raw* rows of
its frame in the detection file, before any confidence filtering.
"""
from __future__ import annotations

import configparser
import dataclasses
import struct
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .geometry import BoundingBox

EMB_MAGIC = b"MTE1"
_HEADER = struct.Struct("<4sII")


class FormatError(ValueError):
    """Malformed input file."""


class ConfigError(ValueError):
    """Unknown key or badly typed value in a pipeline config file."""


@dataclass
class Detection:
    box: BoundingBox
    confidence: float = 1.0
    descriptor: np.ndarray | None = None


@dataclass
class FrameDetections:
    frame: int
    entries: list[Detection] = field(default_factory=list)

    def __len__(self):
        return len(self.entries)


@dataclass(frozen=True)
class SequenceMeta:
    frame_width: int
    frame_height: int
    frame_count: int = 0
    frame_rate: float = 30.0

    @property
    def frame_size(self) -> tuple[int, int]:
        return (self.frame_width, self.frame_height)


def _parse_rows(path, min_fields: int):
    rows = []
    text = Path(path).read_text(encoding="utf-8")
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        parts = line.split(",")
        if len(parts) < min_fields:
            raise FormatError(f"{path}:{lineno}: expected at least {min_fields} fields, got {len(parts)}")
        try:
            values = [float(p) for p in parts]
        except ValueError as exc:
            raise FormatError(f"{path}:{lineno}: {exc}") from None
        frame = values[0]
        if frame != int(frame) or frame < 1:
            raise FormatError(f"{path}:{lineno}: frame index must be a positive integer")
        if values[4] <= 0 or values[5] <= 0:
            raise FormatError(f"{path}:{lineno}: box width and height must be positive")
        rows.append((lineno, values))
    return rows


def read_raw_counts(path) -> dict[int, int]:
    """Number of raw rows per frame, as the embedding sidecar indexes them."""
    counts: dict[int, int] = defaultdict(int)
    for _, v in _parse_rows(path, 7):
        counts[int(v[0])] += 1
    return dict(counts)


def read_mot_detections(path, min_confidence: float = 0.25, embeddings: dict | None = None) -> list[FrameDetections]:
    """Parse a MOT detection file into per-frame detections, ascending by frame.

    ``embeddings`` (from :func:`read_embeddings`) attaches one descriptor per
    raw row before the confidence filter is applied.
    """
    grouped: dict[int, list[Detection]] = defaultdict(list)
    for _, v in _parse_rows(path, 7):
        frame = int(v[0])
        idx = len(grouped[frame])
        desc = None
        if embeddings is not None:
            per_frame = embeddings.get(frame)
            if per_frame is None or idx >= len(per_frame):
                raise FormatError(f"embedding sidecar has no descriptor for frame {frame}, row {idx}")
            desc = per_frame[idx]
        grouped[frame].append(Detection(BoundingBox(v[2], v[3], v[4], v[5]), v[6], desc))
    if embeddings is not None:
        for frame, dets in grouped.items():
            if len(embeddings.get(frame, ())) != len(dets):
                raise FormatError(
                    f"frame {frame}: {len(dets)} detections but {len(embeddings.get(frame, ()))} descriptors"
                )
    return [
        FrameDetections(frame, [d for d in grouped[frame] if d.confidence >= min_confidence])
        for frame in sorted(grouped)
    ]


def read_mot_results(path) -> list[tuple[int, int, BoundingBox]]:
    return [(int(v[0]), int(v[1]), BoundingBox(v[2], v[3], v[4], v[5])) for _, v in _parse_rows(path, 6)]


def read_embeddings(path, expected_counts: dict[int, int] | None = None) -> dict[int, np.ndarray]:
    """Load the sidecar into ``{frame: (n, D) array}`` of unit-norm descriptors."""
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise FormatError(f"{path}: truncated header")
    magic, dim, n_rows = _HEADER.unpack_from(data)
    if magic != EMB_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    if dim == 0:
        raise FormatError(f"{path}: descriptor dimension is zero")
    row_dtype = np.dtype([("frame", "<u4"), ("index", "<u4"), ("vec", "<f4", (dim,))])
    body = data[_HEADER.size :]
    if len(body) != n_rows * row_dtype.itemsize:
        raise FormatError(f"{path}: expected {n_rows} rows of {row_dtype.itemsize} bytes, got {len(body)} bytes")
    rows = np.frombuffer(body, dtype=row_dtype, count=n_rows)

    norms = np.linalg.norm(rows["vec"].astype(np.float64), axis=1) if n_rows else np.zeros(0)
    bad = np.nonzero(~(norms > 0) | ~np.isfinite(norms))[0]
    if len(bad):
        r = rows[bad[0]]
        raise FormatError(f"{path}: zero or non-finite descriptor at frame {r['frame']}, index {r['index']}")

    out: dict[int, np.ndarray] = {}
    for frame in np.unique(rows["frame"]) if n_rows else []:
        sel = rows[rows["frame"] == frame]
        order = np.argsort(sel["index"], kind="stable")
        idx = sel["index"][order]
        if not np.array_equal(idx, np.arange(len(idx))):
            raise FormatError(f"{path}: frame {frame} indices are not 0..{len(idx) - 1}")
        vecs = sel["vec"][order].astype(np.float64)
        out[int(frame)] = vecs / np.linalg.norm(vecs, axis=1, keepdims=True)

    if expected_counts is not None:
        for frame in sorted(set(expected_counts) | set(out)):
            have = len(out.get(frame, ()))
            want = expected_counts.get(frame, 0)
            if have != want:
                raise FormatError(f"frame {frame}: detection file has {want} rows but sidecar has {have}")
    return out


def write_embeddings(path, per_frame: dict[int, np.ndarray]) -> Path:
    frames = sorted(per_frame)
    dims = {np.asarray(per_frame[f]).shape[1] for f in frames if len(per_frame[f])}
    if len(dims) > 1:
        raise ValueError("descriptor dimensionality must be uniform within a sequence")
    dim = dims.pop() if dims else 0
    row_dtype = np.dtype([("frame", "<u4"), ("index", "<u4"), ("vec", "<f4", (dim,))])
    n = sum(len(per_frame[f]) for f in frames)
    rows = np.zeros(n, dtype=row_dtype)
    k = 0
    for f in frames:
        vecs = np.asarray(per_frame[f])
        for i, v in enumerate(vecs):
            rows[k] = (f, i, v)
            k += 1
    path = Path(path)
    path.write_bytes(_HEADER.pack(EMB_MAGIC, dim, n) + rows.tobytes())
    return path


def _fmt(x: float) -> str:
    s = f"{x:.2f}"
    return "0.00" if s == "-0.00" else s


def format_result_row(frame: int, track_id: int, box: BoundingBox) -> str:
    return f"{frame},{track_id},{_fmt(box.left)},{_fmt(box.top)},{_fmt(box.width)},{_fmt(box.height)},1,-1,-1,-1"


def format_results(rows) -> str:
    ordered = sorted(rows, key=lambda r: (r[0], r[1]))
    return "".join(format_result_row(f, i, b) + "\n" for f, i, b in ordered)


def write_mot_results(path, rows) -> Path:
    """Write ``(frame, id, box)`` rows frame-major, then id-ascending."""
    path = Path(path)
    path.write_text(format_results(rows), encoding="utf-8")
    return path


def read_seqinfo(path) -> SequenceMeta:
    parser = configparser.ConfigParser()
    if not parser.read(path, encoding="utf-8"):
        raise FormatError(f"cannot read {path}")
    sec = parser["Sequence"] if parser.has_section("Sequence") else parser[parser.sections()[0]]
    try:
        return SequenceMeta(
            frame_width=int(sec["imWidth"]),
            frame_height=int(sec["imHeight"]),
            frame_count=int(sec.get("seqLength", 0)),
            frame_rate=float(sec.get("frameRate", 30)),
        )
    except (KeyError, ValueError) as exc:
        raise FormatError(f"{path}: {exc}") from None


def write_seqinfo(path, meta: SequenceMeta, name: str = "synthetic") -> Path:
    path = Path(path)
    path.write_text(
        "[Sequence]\n"
        f"name={name}\n"
        f"frameRate={meta.frame_rate:g}\n"
        f"seqLength={meta.frame_count}\n"
        f"imWidth={meta.frame_width}\n"
        f"imHeight={meta.frame_height}\n",
        encoding="utf-8",
    )
    return path


# -- pipeline config ----------------------------------------------------------


def _parse_value(key: str, raw: str, default):
    raw = raw.strip()
    if isinstance(default, bool):
        low = raw.lower()
        if low in ("true", "1", "on"):
            return True
        if low in ("false", "0", "off"):
            return False
        raise ConfigError(f"{key}: expected a boolean, got {raw!r}")
    try:
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        if isinstance(default, tuple):
            vals = tuple(float(p) for p in raw.split(","))
            if len(vals) != len(default):
                raise ConfigError(f"{key}: expected {len(default)} comma-separated numbers")
            return vals
    except ValueError:
        raise ConfigError(f"{key}: expected {type(default).__name__}, got {raw!r}") from None
    raise ConfigError(f"{key}: unsupported option type")


def config_keys() -> dict[str, tuple[str | None, str]]:
    """Flat config key -> (nested section attribute or None, field name)."""
    from .pipeline import PipelineConfig

    keys: dict[str, tuple[str | None, str]] = {}
    for f in dataclasses.fields(PipelineConfig):
        default = f.default_factory() if f.default_factory is not dataclasses.MISSING else f.default
        if dataclasses.is_dataclass(default):
            for sub in dataclasses.fields(default):
                name = "filters_enabled" if sub.name == "enabled" else sub.name
                keys[name] = (f.name, sub.name)
        else:
            keys[f.name] = (None, f.name)
    return keys


def parse_config(text: str, base=None):
    """Parse ``key = value`` lines (``#`` comments) into a PipelineConfig."""
    from .pipeline import PipelineConfig

    cfg = base or PipelineConfig()
    keys = config_keys()
    top: dict = {}
    nested: dict[str, dict] = defaultdict(dict)
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key not in keys:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        section, name = keys[key]
        current = getattr(getattr(cfg, section), name) if section else getattr(cfg, name)
        value = _parse_value(key, raw, current)
        if section:
            nested[section][name] = value
        else:
            top[name] = value
    try:
        for section, values in nested.items():
            top[section] = dataclasses.replace(getattr(cfg, section), **values)
        return dataclasses.replace(cfg, **top)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def read_config(path):
    return parse_config(Path(path).read_text(encoding="utf-8"))
