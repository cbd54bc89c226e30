"""Synthetic vMF feature worlds with known ground truth.

A world has vMF clusters for each class, a labelled synthetic calibration set
drawn from them, and a test set of videos.  Each anomalous video contains one
contiguous anomaly interval drawn from a single anomaly cluster.  The clips at
either edge of the interval can be made ambiguous by drawing them around the
geodesic midpoint between the normal and anomaly means.  Visual features mix a
per-video scene direction with a per-event direction so that scene-similar
clips share labels.

Every random stream is keyed as ``default_rng([seed, stream, index])`` so any
part of a world can be regenerated independently.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import brentq

from .io import FeatureDataset, Video
from .sphere import frechet_mean, geodesic_distance, normalize, slerp
from .vmf import VmfParams, sample_vmf

# stream ids for default_rng([seed, stream, index])
_SYN, _VIDEO, _LAYOUT, _EVENT, _CONE = 1, 2, 3, 4, 5


@dataclass(frozen=True)
class Cluster:
    mean: np.ndarray
    kappa: float

    def __post_init__(self):
        object.__setattr__(self, "mean", normalize(np.asarray(self.mean, dtype=np.float64)))
        if not self.kappa > 0:
            raise ValueError("cluster kappa must be > 0")


@dataclass(frozen=True)
class WorldSpec:
    dim: int
    normal: tuple[Cluster, ...]
    anomalies: tuple[Cluster, ...]
    syn_per_cluster: int = 200
    normal_videos: int = 12
    anomalous_videos: int = 12
    clips_per_video: int = 32
    # anomaly interval length as a fraction of the video, drawn uniformly
    anomaly_fraction: tuple[float, float] = (0.3, 0.6)
    # explicit (start, end) clip intervals per anomalous video; overrides the draw
    intervals: tuple[tuple[int, int], ...] | None = None
    # clips at each interval edge drawn around the normal/anomaly midpoint
    ambiguous_clips: int = 0
    ambiguous_t: float = 0.5
    ambiguous_kappa: float | None = None
    # visual = pole + scene + event, so the visual stream is conical like the main one
    pole_weight: float = 2.0
    scene_weight: float = 0.3
    event_weight: float = 1.0
    visual_kappa: float = 1000.0
    rotation_deg: float = 0.0
    rotation_plane: tuple[int, int] = (0, 2)
    frames_per_clip: int = 4
    seed: int = 0

    def __post_init__(self):
        if self.dim < 3:
            raise ValueError("dim must be >= 3")
        if not self.normal or not self.anomalies:
            raise ValueError("need at least one normal and one anomaly cluster")
        for c in (*self.normal, *self.anomalies):
            if c.mean.shape != (self.dim,):
                raise ValueError("cluster mean does not match dim")
        if self.clips_per_video < 1 or self.frames_per_clip < 1:
            raise ValueError("clips_per_video and frames_per_clip must be >= 1")
        lo, hi = self.anomaly_fraction
        if not 0.0 < lo <= hi <= 1.0:
            raise ValueError("anomaly_fraction must satisfy 0 < lo <= hi <= 1")
        if self.intervals is not None:
            if len(self.intervals) != self.anomalous_videos:
                raise ValueError("need one interval per anomalous video")
            for a, b in self.intervals:
                if not 0 <= a < b <= self.clips_per_video:
                    raise ValueError(f"interval ({a}, {b}) outside the video")


@dataclass
class World:
    spec: WorldSpec
    dataset: FeatureDataset
    syn_normal: np.ndarray
    syn_abn: np.ndarray
    clip_labels: dict[str, np.ndarray]
    intervals: dict[str, tuple[int, int]] = field(default_factory=dict)

    def clip_label_vector(self) -> np.ndarray:
        return np.concatenate([self.clip_labels[v.id] for v in self.dataset.videos])


def _rng(seed: int, stream: int, index: int = 0) -> np.random.Generator:
    return np.random.default_rng([seed, stream, index])


def basis(dim: int, i: int) -> np.ndarray:
    e = np.zeros(dim)
    e[i] = 1.0
    return e


def direction(dim: int, angles: dict[int, float]) -> np.ndarray:
    """Unit vector tilted from the pole ``e0`` by ``angles[axis]`` degrees along each axis."""
    v = basis(dim, 0)
    for axis, deg in angles.items():
        v = rotate_domain(v, basis(dim, 0), basis(dim, axis), deg)
    return v


def rotate_domain(points, u, v, angle_deg: float) -> np.ndarray:
    """Givens rotation by ``angle_deg`` in the plane spanned by orthonormal ``u`` and ``v``.

    Rotates ``u`` toward ``v``; the orthogonal complement of the plane is fixed.
    """
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if abs(u @ u - 1) > 1e-9 or abs(v @ v - 1) > 1e-9 or abs(u @ v) > 1e-9:
        raise ValueError("rotation axes must be orthonormal")
    x = np.asarray(points, dtype=np.float64)
    th = np.radians(angle_deg)
    a = x @ u
    b = x @ v
    c, s = np.cos(th), np.sin(th)
    a_new = c * a - s * b
    b_new = s * a + c * b
    return x + np.multiply.outer(a_new - a, u) + np.multiply.outer(b_new - b, v)


def gen_two_class(spec: WorldSpec) -> tuple[np.ndarray, np.ndarray]:
    """Labelled calibration sample: ``syn_per_cluster`` draws from every cluster.

    Returns ``(points, labels)`` with label 1 for anomaly clusters.
    """
    feats, labels = [], []
    clusters = [(c, 0) for c in spec.normal] + [(c, 1) for c in spec.anomalies]
    for i, (c, lab) in enumerate(clusters):
        feats.append(sample_vmf(VmfParams(c.mean, c.kappa), spec.syn_per_cluster, _rng(spec.seed, _SYN, i)))
        labels.append(np.full(spec.syn_per_cluster, lab, dtype=np.int8))
    return np.concatenate(feats), np.concatenate(labels)


def _event_directions(spec: WorldSpec) -> np.ndarray:
    """One random visual direction per event type (normal first, then each anomaly)."""
    rng = _rng(spec.seed, _EVENT)
    return normalize(rng.standard_normal((1 + len(spec.anomalies), spec.dim)))


def _layout(spec: WorldSpec) -> list[tuple[int, tuple[int, int] | None]]:
    """Per test video: ``(event index, anomaly interval or None)``."""
    rng = _rng(spec.seed, _LAYOUT)
    t = spec.clips_per_video
    out: list[tuple[int, tuple[int, int] | None]] = [(0, None)] * spec.normal_videos
    for j in range(spec.anomalous_videos):
        event = 1 + j % len(spec.anomalies)
        if spec.intervals is not None:
            span = spec.intervals[j]
        else:
            length = max(1, int(round(t * rng.uniform(*spec.anomaly_fraction))))
            start = int(rng.integers(0, t - length + 1))
            span = (start, start + length)
        out.append((event, span))
    return out


def _video(spec: WorldSpec, idx: int, event: int, span, events: np.ndarray):
    rng = _rng(spec.seed, _VIDEO, idx)
    t, d = spec.clips_per_video, spec.dim
    normal = spec.normal[idx % len(spec.normal)]
    labels = np.zeros(t, dtype=np.int8)
    kinds = np.zeros(t, dtype=np.int64)  # 0 normal, 1 anomaly, 2 ambiguous edge
    if span is not None:
        a, b = span
        labels[a:b] = 1
        kinds[a:b] = 1
        w = min(spec.ambiguous_clips, (b - a) // 2)
        if w:
            kinds[a : a + w] = 2
            kinds[b - w : b] = 2

    main = np.empty((t, d))
    main[kinds == 0] = sample_vmf(VmfParams(normal.mean, normal.kappa), int((kinds == 0).sum()), rng)
    if span is not None:
        anom = spec.anomalies[event - 1]
        main[kinds == 1] = sample_vmf(VmfParams(anom.mean, anom.kappa), int((kinds == 1).sum()), rng)
        n_amb = int((kinds == 2).sum())
        if n_amb:
            mid = slerp(normal.mean, anom.mean, spec.ambiguous_t)
            kappa = spec.ambiguous_kappa or anom.kappa
            main[kinds == 2] = sample_vmf(VmfParams(mid, kappa), n_amb, rng)

    scene = normalize(rng.standard_normal(d))
    ev = np.where(labels[:, None] == 1, events[event], events[0])
    centre = normalize(spec.pole_weight * basis(d, 0) + spec.scene_weight * scene + spec.event_weight * ev)
    visual = np.stack([sample_vmf(VmfParams(c, spec.visual_kappa), 1, rng)[0] for c in centre])

    if spec.rotation_deg:
        u, v = (basis(d, i) for i in spec.rotation_plane)
        main = rotate_domain(main, u, v, spec.rotation_deg)
        visual = rotate_domain(visual, u, v, spec.rotation_deg)
    return main, visual, labels


def make_world(spec: WorldSpec) -> World:
    pts, lab = gen_two_class(spec)
    events = _event_directions(spec)
    videos, clip_labels, frame_labels, intervals = [], {}, {}, {}
    for idx, (event, span) in enumerate(_layout(spec)):
        name = f"vid{idx:03d}_{'abn' if span else 'nrm'}"
        main, visual, labels = _video(spec, idx, event, span, events)
        videos.append(Video(name, main.astype(np.float32), visual.astype(np.float32)))
        clip_labels[name] = labels
        frame_labels[name] = np.repeat(labels, spec.frames_per_clip)
        if span:
            intervals[name] = span
    ds = FeatureDataset(spec.dim, videos, frame_labels)
    return World(spec, ds, pts[lab == 0], pts[lab == 1], clip_labels, intervals)


def angular_std_deg(points, mean=None) -> float:
    """Root-mean-square angle (degrees) of the points around their mean direction."""
    x = normalize(np.atleast_2d(points))
    mu = normalize(x.mean(axis=0)) if mean is None else normalize(mean)
    return float(np.degrees(np.sqrt(np.mean(geodesic_distance(x, mu) ** 2))))


def kappa_for_std(dim: int, std_deg: float, n: int = 4000, seed: int = 0) -> float:
    """Concentration whose samples have the requested RMS angular spread, by bracketing root search."""
    if not std_deg > 0:
        raise ValueError("requested angular std must be > 0")
    mu = basis(dim, 0)

    def gap(log_kappa: float) -> float:
        x = sample_vmf(VmfParams(mu, float(np.exp(log_kappa))), n, _rng(seed, _CONE))
        return angular_std_deg(x, mu) - std_deg

    # small-angle guess: E[theta^2] ~ (dim - 1) / kappa
    guess = np.log((dim - 1) / np.radians(std_deg) ** 2)
    lo, hi = guess - 3.0, guess + 3.0
    return float(np.exp(brentq(gap, lo, hi, xtol=1e-6)))


def gen_conical(dim: int, std_deg: float, n: int, seed: int = 0, mean=None) -> np.ndarray:
    """Tight vMF cone around ``mean`` (default the pole) with the requested angular spread."""
    kappa = kappa_for_std(dim, std_deg, seed=seed)
    mu = basis(dim, 0) if mean is None else normalize(mean)
    return sample_vmf(VmfParams(mu, kappa), n, _rng(seed, _CONE, 1))


def frechet_gap_deg(a, b) -> float:
    """Geodesic angle between the Fréchet means of two samples, in degrees."""
    return float(np.degrees(geodesic_distance(frechet_mean(a).mean, frechet_mean(b).mean)))


# --- named presets -----------------------------------------------------------


def preset_a(seed: int = 0) -> WorldSpec:
    """Well separated: two classes 60 degrees apart, kappa 100, D = 32."""
    d = 32
    return WorldSpec(
        dim=d,
        normal=(Cluster(direction(d, {1: -30.0}), 100.0),),
        anomalies=(Cluster(direction(d, {1: 30.0}), 100.0),),
        seed=seed,
    )


def preset_c(seed: int = 0) -> WorldSpec:
    """Domain shift: the test set of preset A rotated by 5 degrees."""
    return replace(preset_a(seed), rotation_deg=5.0, rotation_plane=(0, 2))


def preset_b(seed: int = 0) -> WorldSpec:
    """Diverse anomalies: one tight normal cluster and eight anomaly clusters on a half ring.

    The ring is 70 degrees wide and fans out around the normal cluster, so the
    mean of all anomalies lies close to the normal direction and a single
    anomalous prototype cannot cover them.  The first and last four clips of
    every anomaly interval sit 30% of the way from the normal mean to the
    anomaly mean, which makes them hard to score on their own.
    """
    d = 32
    normal = Cluster(direction(d, {1: -20.0}), 1000.0)
    anomalies = []
    for j in range(8):
        phi = np.radians(180.0 * j / 7.0)
        anomalies.append(Cluster(direction(d, {1: -20.0 + 70.0 * np.sin(phi), 2 + j: 70.0 * np.cos(phi)}), 100.0))
    return WorldSpec(
        dim=d,
        normal=(normal,),
        anomalies=tuple(anomalies),
        syn_per_cluster=80,
        normal_videos=16,
        anomalous_videos=16,
        ambiguous_clips=4,
        ambiguous_t=0.3,
        seed=seed,
    )


def preset_d(seed: int = 0) -> WorldSpec:
    """Conical: two classes inside a narrow cone, each with angular spread 1.7 degrees."""
    d = 32
    kappa = kappa_for_std(d, 1.7, seed=seed)
    return WorldSpec(
        dim=d,
        normal=(Cluster(direction(d, {1: -2.0}), kappa),),
        anomalies=(Cluster(direction(d, {1: 2.0}), kappa),),
        seed=seed,
    )


PRESETS = {"A": preset_a, "B": preset_b, "C": preset_c, "D": preset_d}


def preset_world(name: str, seed: int = 0) -> World:
    key = name.upper()
    if key not in PRESETS:
        raise ValueError(f"unknown world preset {name!r}; choose from {sorted(PRESETS)}")
    return make_world(PRESETS[key](seed))
