"""End-to-end scoring: centering, calibration, scene attention, vMF scoring, pulling, smoothing.

Offline mode sees the whole test set: the centering mean pools synthetic and
test main features, and cross-video attention runs over every test clip.
Online mode centers with a synthetic-only mean and scores each clip alone.
"""

from __future__ import annotations

import math
from collections.abc import Iterable, Iterator
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import correlate1d

from .attention import build_sparse_attention, hsa_enhance
from .config import PipelineConfig
from .errors import DimensionMismatch
from .io import FeatureDataset
from .prototypes import PrototypeBank, calibrate
from .sgp import sgp_video
from .sphere import center_many, frechet_mean, normalize
from .vmf import vmf_score


@dataclass
class CalibrationPriors:
    unified_mean: np.ndarray
    visual_mean: np.ndarray
    bank: PrototypeBank
    synthetic_only: bool = False


@dataclass
class ScoreTrace:
    video_id: str
    clip_scores_init: np.ndarray
    clip_scores_final: np.ndarray
    frame_scores: np.ndarray


@dataclass
class OfflineResult:
    traces: list[ScoreTrace]
    priors: CalibrationPriors
    # clips that coincided with a centering base and were passed through uncentered
    at_base_count: int = 0
    enhanced: np.ndarray | None = field(default=None, repr=False)

    def __iter__(self):
        return iter((self.traces, self.priors))

    def frame_scores(self) -> np.ndarray:
        return np.concatenate([t.frame_scores for t in self.traces])

    def clip_scores(self, final: bool = True) -> np.ndarray:
        return np.concatenate([t.clip_scores_final if final else t.clip_scores_init for t in self.traces])


def expand_and_smooth(clip_scores, frames_per_clip: int, sigma_clips: float) -> np.ndarray:
    """Repeat each clip score per frame, then Gaussian-smooth with mirrored edges."""
    s = np.asarray(clip_scores, dtype=np.float64)
    if s.size == 0:
        raise ValueError("need at least one clip score")
    frames = np.repeat(s, frames_per_clip)
    if sigma_clips > 0:
        frames = correlate1d(frames, gaussian_kernel(sigma_clips * frames_per_clip), mode="reflect")
    return np.clip(frames, 0.0, 1.0)


def gaussian_kernel(sigma: float) -> np.ndarray:
    radius = math.ceil(4.0 * sigma)
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-0.5 * (x / sigma) ** 2)
    return k / k.sum()


def _check_dims(dim: int, *arrays) -> None:
    for a in arrays:
        if a is not None and np.shape(a)[-1] != dim:
            raise DimensionMismatch(f"expected dimension {dim}, got {np.shape(a)[-1]}")


def calibrate_priors(dataset: FeatureDataset | None, syn_normal, syn_abn,
                     config: PipelineConfig) -> CalibrationPriors:
    """Centering means plus a prototype bank fitted on centered synthetic features.

    Offline, the main-stream mean pools synthetic and test clips.  Online (or
    with no dataset) it uses synthetic clips only.  The visual mean always
    comes from test clips when they are available.
    """
    syn_n = normalize(np.atleast_2d(np.asarray(syn_normal, dtype=np.float64)))
    syn_a = normalize(np.atleast_2d(np.asarray(syn_abn, dtype=np.float64)))
    dim = syn_n.shape[1]
    _check_dims(dim, syn_a)
    synthetic_only = dataset is None or config.mode == "online"

    pool = [syn_n, syn_a]
    if dataset is not None:
        _check_dims(dim, np.empty((0, dataset.dim)))
        main, vis, _ = dataset.stacked()
        if not synthetic_only:
            pool.append(normalize(main))
        vis_mean = frechet_mean(normalize(vis), config.frechet_t_max, config.frechet_eps).mean
    unified = frechet_mean(np.concatenate(pool), config.frechet_t_max, config.frechet_eps).mean
    if dataset is None:
        vis_mean = unified

    cn, _ = center_many(unified, syn_n)
    ca, _ = center_many(unified, syn_a)
    bank = calibrate(cn, ca, config.k_n, config.k_a, config.kappa, config.seed, config.n_init, config.max_iter)
    return CalibrationPriors(unified, vis_mean, bank, synthetic_only)


def score_with_priors(dataset: FeatureDataset, priors: CalibrationPriors, config: PipelineConfig,
                      threads: int = 1) -> OfflineResult:
    _check_dims(priors.bank.dim, np.empty((0, dataset.dim)), priors.unified_mean, priors.visual_mean)
    main, vis, offsets = dataset.stacked()
    f, at_main = center_many(priors.unified_mean, main)
    v, at_vis = center_many(priors.visual_mean, vis)

    if config.enable_hsa:
        attn = build_sparse_attention(v, config.hsa_attention)
        f = hsa_enhance(f, attn, config.alpha_g)
    init = np.atleast_1d(vmf_score(f, priors.bank))

    spans = list(zip(offsets[:-1], offsets[1:]))

    def finish(span):
        a, b = span
        if config.enable_sgp:
            return sgp_video(f[a:b], v[a:b], init[a:b], priors.bank, config.sgp).scores
        return init[a:b].copy()

    # each video is independent and map() keeps input order, so results do not
    # depend on the worker count
    if threads > 1 and len(spans) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            finals = list(pool.map(finish, spans))
    else:
        finals = [finish(s) for s in spans]

    traces = [
        ScoreTrace(
            vid.id,
            init[a:b].copy(),
            final,
            expand_and_smooth(final, config.frames_per_clip, config.smooth_sigma_clips),
        )
        for vid, (a, b), final in zip(dataset.videos, spans, finals)
    ]
    count = int(at_main.sum() + at_vis.sum())
    return OfflineResult(traces, priors, count, f)


def run_offline(dataset: FeatureDataset, syn_normal, syn_abn, config: PipelineConfig,
                threads: int = 1) -> OfflineResult:
    if not dataset.videos:
        raise ValueError("dataset has no videos")
    if len(syn_normal) < config.k_n or len(syn_abn) < config.k_a:
        raise ValueError("need at least k_n normal and k_a anomalous synthetic features")
    priors = calibrate_priors(dataset, syn_normal, syn_abn, config)
    return score_with_priors(dataset, priors, config, threads)


@dataclass(frozen=True)
class OnlineScore:
    score: float
    # the clip coincided with the centering base and was scored neutrally
    at_base: bool = False


def run_online(clip_stream: Iterable, priors: CalibrationPriors,
               config: PipelineConfig | None = None) -> Iterator[OnlineScore]:
    """Center and score each clip as it arrives; no state is carried between clips.

    Stream items are main feature vectors or ``(main, visual)`` pairs; the
    visual stream is ignored.
    """
    mu = priors.unified_mean
    for item in clip_stream:
        main = item[0] if isinstance(item, tuple) else item
        x = np.asarray(main, dtype=np.float64)
        _check_dims(priors.bank.dim, x)
        c, at_base = center_many(mu, x)
        if at_base[0]:
            yield OnlineScore(0.5, True)
        else:
            yield OnlineScore(float(vmf_score(c[0], priors.bank)))
