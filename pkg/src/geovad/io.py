"""Binary feature files, calibration-prior files, and the CSV/JSON score formats.

Feature file (``GVF1``), little-endian::

    magic "GVF1" | u32 version=1 | u32 D | u32 stream_count=2 | u32 video_count
    per video: u32 name_len | utf-8 name | u32 T | T*D f32 main | T*D f32 visual

Multi-layer file (``GVFL``) uses the same header with ``layer_count`` in place of
``video_count``; each layer block is ``u32 video_count`` followed by videos in the
GVF1 layout.  Records whose id starts with ``abn`` are the anomalous class when a
file holds class-grouped calibration features rather than test videos.

Priors file (``GVPR``)::

    magic "GVPR" | u32 version=1 | u32 D | u32 flags (bit0: synthetic-only mean)
    D f64 unified mean | D f64 visual mean
"""

from __future__ import annotations

import csv
import io
import json
import struct
from collections.abc import Iterator
from dataclasses import dataclass
from pathlib import Path
from typing import BinaryIO

import numpy as np

from .errors import BadMagic, DimensionMismatch, FormatError, NonFiniteValue, TruncatedFile

FEATURE_MAGIC = b"GVF1"
LAYERS_MAGIC = b"GVFL"
PRIORS_MAGIC = b"GVPR"
VERSION = 1
STREAMS = 2

_U32 = struct.Struct("<I")


@dataclass
class Video:
    id: str
    main: np.ndarray
    visual: np.ndarray

    @property
    def clip_count(self) -> int:
        return self.main.shape[0]


@dataclass
class FeatureDataset:
    dim: int
    videos: list[Video]
    # frame-level 0/1 ground truth keyed by video id
    labels: dict[str, np.ndarray] | None = None

    def __post_init__(self):
        for v in self.videos:
            if v.main.shape != v.visual.shape or v.main.ndim != 2 or v.main.shape[1] != self.dim:
                raise DimensionMismatch(f"video {v.id!r} has streams of shape {v.main.shape}/{v.visual.shape}")
            if v.clip_count < 1:
                raise FormatError(f"video {v.id!r} has no clips")

    @property
    def clip_count(self) -> int:
        return sum(v.clip_count for v in self.videos)

    def stacked(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """All clips as ``(main, visual, offsets)``; video ``i`` spans ``offsets[i]:offsets[i+1]``."""
        main = np.concatenate([v.main for v in self.videos]).astype(np.float64)
        vis = np.concatenate([v.visual for v in self.videos]).astype(np.float64)
        offsets = np.concatenate([[0], np.cumsum([v.clip_count for v in self.videos])])
        return main, vis, offsets

    def frame_labels(self) -> np.ndarray:
        if self.labels is None:
            raise FormatError("dataset carries no frame labels")
        return np.concatenate([self.labels[v.id] for v in self.videos])


class _Reader:
    def __init__(self, stream: BinaryIO):
        self.stream = stream
        self.offset = 0

    def take(self, n: int, what: str) -> bytes:
        buf = self.stream.read(n)
        if len(buf) < n:
            raise TruncatedFile(f"file ended inside {what} at byte {self.offset + len(buf)}")
        self.offset += n
        return buf

    def u32(self, what: str) -> int:
        return _U32.unpack(self.take(4, what))[0]

    def floats(self, count: int, what: str) -> np.ndarray:
        start = self.offset
        vals = np.frombuffer(self.take(4 * count, what), dtype="<f4")
        bad = np.flatnonzero(~np.isfinite(vals))
        if bad.size:
            raise NonFiniteValue(start + 4 * int(bad[0]))
        return vals


def _read_header(r: _Reader, magic: bytes) -> tuple[int, int]:
    got = r.take(4, "magic")
    if got != magic:
        raise BadMagic(f"expected {magic!r}, got {got!r}")
    version = r.u32("header")
    if version != VERSION:
        raise BadMagic(f"unsupported version {version}")
    dim = r.u32("header")
    streams = r.u32("header")
    if streams != STREAMS:
        raise FormatError(f"expected {STREAMS} streams, found {streams}")
    return dim, r.u32("header")


def _read_video(r: _Reader, dim: int) -> Video:
    name = r.take(r.u32("name length"), "video name").decode("utf-8")
    t = r.u32("clip count")
    if t < 1:
        raise FormatError(f"video {name!r} has no clips")
    main = r.floats(t * dim, "main features").reshape(t, dim)
    vis = r.floats(t * dim, "visual features").reshape(t, dim)
    return Video(name, main, vis)


def _video_bytes(v: Video) -> bytes:
    name = v.id.encode("utf-8")
    main = np.ascontiguousarray(v.main, dtype="<f4")
    vis = np.ascontiguousarray(v.visual, dtype="<f4")
    if not (np.all(np.isfinite(main)) and np.all(np.isfinite(vis))):
        raise NonFiniteValue(-1)
    return _U32.pack(len(name)) + name + _U32.pack(v.clip_count) + main.tobytes() + vis.tobytes()


def iter_videos(stream: BinaryIO) -> Iterator[tuple[int, Video]]:
    """Yield ``(dim, video)`` as each record of a GVF1 stream arrives."""
    r = _Reader(stream)
    dim, count = _read_header(r, FEATURE_MAGIC)
    for _ in range(count):
        yield dim, _read_video(r, dim)


def features_to_bytes(ds: FeatureDataset) -> bytes:
    head = FEATURE_MAGIC + struct.pack("<IIII", VERSION, ds.dim, STREAMS, len(ds.videos))
    return head + b"".join(_video_bytes(v) for v in ds.videos)


def features_from_bytes(buf: bytes) -> FeatureDataset:
    videos, dim = [], None
    r = _Reader(io.BytesIO(buf))
    dim, count = _read_header(r, FEATURE_MAGIC)
    for _ in range(count):
        videos.append(_read_video(r, dim))
    return FeatureDataset(dim, videos)


def write_features(ds: FeatureDataset, path) -> None:
    Path(path).write_bytes(features_to_bytes(ds))


def read_features(path) -> FeatureDataset:
    return features_from_bytes(Path(path).read_bytes())


def write_layers(layers: list[FeatureDataset], path) -> None:
    dim = layers[0].dim
    if any(l.dim != dim for l in layers):
        raise DimensionMismatch("all layers must share one dimension")
    parts = [LAYERS_MAGIC + struct.pack("<IIII", VERSION, dim, STREAMS, len(layers))]
    for layer in layers:
        parts.append(_U32.pack(len(layer.videos)))
        parts.extend(_video_bytes(v) for v in layer.videos)
    Path(path).write_bytes(b"".join(parts))


def read_layers(path) -> list[FeatureDataset]:
    r = _Reader(io.BytesIO(Path(path).read_bytes()))
    dim, n_layers = _read_header(r, LAYERS_MAGIC)
    layers = []
    for _ in range(n_layers):
        count = r.u32("layer video count")
        layers.append(FeatureDataset(dim, [_read_video(r, dim) for _ in range(count)]))
    return layers


def is_abnormal_id(name: str) -> bool:
    return name.lower().startswith("abn")


def split_by_class(ds: FeatureDataset) -> tuple[np.ndarray, np.ndarray]:
    """Main-stream features of a class-grouped calibration file as ``(normal, abnormal)``."""
    norm = [v.main for v in ds.videos if not is_abnormal_id(v.id)]
    abn = [v.main for v in ds.videos if is_abnormal_id(v.id)]
    if not norm or not abn:
        raise FormatError("calibration file needs both normal and abn* records")
    return np.concatenate(norm).astype(np.float64), np.concatenate(abn).astype(np.float64)


def class_dataset(normal, abnormal) -> FeatureDataset:
    """Pack calibration features as a two-record GVF1 dataset (visual = main)."""
    normal = np.asarray(normal, dtype=np.float32)
    abnormal = np.asarray(abnormal, dtype=np.float32)
    return FeatureDataset(normal.shape[1], [Video("normal", normal, normal), Video("abnormal", abnormal, abnormal)])


@dataclass
class PriorsFile:
    unified_mean: np.ndarray
    visual_mean: np.ndarray
    synthetic_only: bool = False


def write_priors(p: PriorsFile, path) -> None:
    dim = p.unified_mean.shape[0]
    head = PRIORS_MAGIC + struct.pack("<III", VERSION, dim, int(p.synthetic_only))
    body = np.concatenate([p.unified_mean, p.visual_mean]).astype("<f8").tobytes()
    Path(path).write_bytes(head + body)


def read_priors(path) -> PriorsFile:
    r = _Reader(io.BytesIO(Path(path).read_bytes()))
    got = r.take(4, "magic")
    if got != PRIORS_MAGIC:
        raise BadMagic(f"expected {PRIORS_MAGIC!r}, got {got!r}")
    version, dim, flags = (r.u32("header") for _ in range(3))
    if version != VERSION:
        raise BadMagic(f"unsupported version {version}")
    start = r.offset
    vals = np.frombuffer(r.take(16 * dim, "priors payload"), dtype="<f8")
    bad = np.flatnonzero(~np.isfinite(vals))
    if bad.size:
        raise NonFiniteValue(start + 8 * int(bad[0]))
    vals = vals.astype(np.float64)
    return PriorsFile(vals[:dim], vals[dim:], bool(flags & 1))


def write_labels(labels: dict[str, np.ndarray], path, order: list[str] | None = None) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["video_id", "frame_index", "label"])
        for vid in order or list(labels):
            for i, lab in enumerate(labels[vid]):
                w.writerow([vid, i, int(lab)])


def _read_keyed_csv(path, column: str, cast) -> dict[str, np.ndarray]:
    out: dict[str, list] = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or column not in reader.fieldnames:
            raise FormatError(f"{path}: missing {column!r} column")
        for lineno, row in enumerate(reader, start=2):
            try:
                vid, idx, val = row["video_id"], int(row["frame_index"]), cast(row[column])
            except (KeyError, TypeError, ValueError) as exc:
                raise FormatError(f"{path}:{lineno}: {exc}") from exc
            frames = out.setdefault(vid, [])
            if idx != len(frames):
                raise FormatError(f"{path}:{lineno}: frame_index {idx} out of order for {vid!r}")
            frames.append(val)
    return {k: np.asarray(v) for k, v in out.items()}


def read_labels(path) -> dict[str, np.ndarray]:
    return _read_keyed_csv(path, "label", int)


def read_scores(path) -> dict[str, np.ndarray]:
    return _read_keyed_csv(path, "score", float)


def write_scores_csv(traces, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["video_id", "frame_index", "score"])
        for tr in traces:
            for i, s in enumerate(tr.frame_scores):
                w.writerow([tr.video_id, i, repr(float(s))])


def write_scores_json(traces, path) -> None:
    records = [
        {
            "video_id": tr.video_id,
            "clip_scores_init": [float(x) for x in tr.clip_scores_init],
            "clip_scores_final": [float(x) for x in tr.clip_scores_final],
            "frame_scores": [float(x) for x in tr.frame_scores],
        }
        for tr in traces
    ]
    Path(path).write_text(json.dumps(records, indent=1) + "\n")
