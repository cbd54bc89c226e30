"""Per-video spherical geodesic pulling of ambiguous clips toward dominant prototypes.

Stages: MAD-sized ambiguity interval and tri-classification, dominant-prototype
voting, neighbour-consensus labelling over an intra-video attention graph, and
a score-adaptive SLERP pull followed by re-scoring.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np
from scipy.special import expit

from .attention import AttentionParams, SparseAttention, build_sparse_attention
from .errors import DimensionMismatch, OutOfInterval
from .sphere import SLERP_SIN_FLOOR, ZERO_NORM, geodesic_distance, slerp
from .vmf import vmf_score


class Tri(IntEnum):
    NORM = 0
    AMB = 1
    ABN = 2


@dataclass(frozen=True)
class SgpParams:
    beta_base: float = 0.5
    r_min: float = 0.05
    r_max: float = 0.25
    lambda_r: float = 20.0
    tau_r: float = 0.08
    gamma_min: float = 0.02
    delta_margin: float = 0.01
    attention: AttentionParams = field(
        default_factory=lambda: AttentionParams(tau=0.70, top_k=10, temperature=0.10, exclude_self=True)
    )

    def __post_init__(self):
        if not 0.0 < self.beta_base < 1.0:
            raise ValueError("beta_base must lie in (0, 1)")
        if not 0.0 < self.r_min < self.r_max <= 0.5:
            raise ValueError("need 0 < r_min < r_max <= 0.5")
        if self.lambda_r <= 0 or self.tau_r <= 0:
            raise ValueError("lambda_r and tau_r must be positive")
        if not 0.0 < self.gamma_min < 1.0:
            raise ValueError("gamma_min must lie in (0, 1)")
        if self.delta_margin < 0:
            raise ValueError("delta_margin must be >= 0")


@dataclass(frozen=True)
class AmbiguityInterval:
    rho_low: float
    rho_high: float
    mad: float
    radius: float
    median: float


@dataclass
class DominantSet:
    abn: np.ndarray | None
    norms: np.ndarray
    fully_normal: bool
    abn_index: int | None = None
    norm_indices: tuple[int, ...] = ()


def mad_interval(scores, params: SgpParams) -> AmbiguityInterval:
    s = np.asarray(scores, dtype=np.float64)
    if s.size == 0:
        raise ValueError("mad_interval needs at least one score")
    med = float(np.median(s))
    mad = float(np.median(np.abs(s - med)))
    # r_min + (r_max - r_min) * sigmoid(-z), written from r_max so that MAD = tau_r lands exactly on the midpoint
    r = params.r_max - (params.r_max - params.r_min) * float(expit(params.lambda_r * (mad - params.tau_r)))
    return AmbiguityInterval(max(0.0, 0.5 - r), min(1.0, 0.5 + r), mad, r, med)


def tri_classify(scores, interval: AmbiguityInterval) -> np.ndarray:
    s = np.asarray(scores, dtype=np.float64)
    labels = np.full(s.shape, Tri.AMB, dtype=np.int8)
    labels[s < interval.rho_low] = Tri.NORM
    labels[s > interval.rho_high] = Tri.ABN
    return labels


def min_abnormal_count(t_total: int, gamma_min: float) -> int:
    # the epsilon keeps products such as 0.29 * 100 from flooring to 28
    return max(3, math.floor(gamma_min * t_total + 1e-9))


def _votes(feats: np.ndarray, protos: np.ndarray) -> np.ndarray:
    return np.bincount(np.argmax(feats @ protos.T, axis=1), minlength=protos.shape[0])


def vote_dominant(feats, labels, bank, params: SgpParams, t_total: int | None = None) -> DominantSet:
    """Majority-vote the prevailing anomalous prototype and up to two normal ones."""
    f = np.atleast_2d(np.asarray(feats, dtype=np.float64))
    labels = np.asarray(labels)
    t_total = len(f) if t_total is None else t_total

    norm_feats = f[labels == Tri.NORM]
    if len(norm_feats):
        counts = _votes(norm_feats, bank.norm_protos)
        order = np.argsort(-counts, kind="stable")
        norm_idx = tuple(int(k) for k in order[:2] if counts[k] > 0)
    else:
        centroid = f.sum(axis=0)
        if np.linalg.norm(centroid) < ZERO_NORM:
            centroid = f[0]
        norm_idx = (int(np.argmax(bank.norm_protos @ centroid)),)
    norms = bank.norm_protos[list(norm_idx)]

    abn_feats = f[labels == Tri.ABN]
    if len(abn_feats) < min_abnormal_count(t_total, params.gamma_min):
        return DominantSet(None, norms, True, None, norm_idx)
    k_star = int(np.argmax(_votes(abn_feats, bank.abn_protos)))
    return DominantSet(bank.abn_protos[k_star], norms, False, k_star, norm_idx)


def neighbor_assign(amb_indices, attn: SparseAttention, enh_feats, dom: DominantSet,
                    delta_margin: float) -> np.ndarray:
    """Label each ambiguous clip from its neighbours' aggregated main feature.

    Returns a boolean array, True where the clip is assigned anomalous.
    """
    amb = np.asarray(amb_indices, dtype=np.int64)
    out = np.zeros(amb.shape, dtype=bool)
    if dom.fully_normal or amb.size == 0:
        return out
    f = np.asarray(enh_feats, dtype=np.float64)
    for n, i in enumerate(amb):
        cols, w = attn.row(int(i))
        g = f[i]
        if cols.size:
            agg = w @ f[cols]
            norm = np.linalg.norm(agg)
            if norm >= ZERO_NORM:
                g = agg / norm
        sim_abn = float(g @ dom.abn)
        sim_norm = float(np.max(dom.norms @ g))
        out[n] = sim_abn > sim_norm + delta_margin
    return out


def adaptive_beta(score: float, interval: AmbiguityInterval, beta_base: float) -> float:
    """Pull strength: ``beta_base`` at score 0.5, halving linearly toward the interval ends."""
    if not interval.rho_low <= score <= interval.rho_high:
        raise OutOfInterval(f"score {score} outside [{interval.rho_low}, {interval.rho_high}]")
    if score >= 0.5:
        denom = interval.rho_high - 0.5
        d_hat = 1.0 if denom <= 0 else (score - 0.5) / denom
    else:
        denom = 0.5 - interval.rho_low
        d_hat = 1.0 if denom <= 0 else (0.5 - score) / denom
    d_hat = min(max(d_hat, 0.0), 1.0)
    return beta_base * (1.0 - 0.5 * d_hat)


@dataclass
class SgpResult:
    scores: np.ndarray
    features: np.ndarray
    interval: AmbiguityInterval
    tri_labels: np.ndarray
    dominant: DominantSet
    amb_indices: np.ndarray
    amb_is_abn: np.ndarray
    betas: np.ndarray

    def __iter__(self):
        # unpacks as (final_scores, pulled_feats)
        return iter((self.scores, self.features))


def _pull(f: np.ndarray, target: np.ndarray, beta: float) -> np.ndarray:
    omega = geodesic_distance(f, target)
    if np.sin(omega) < SLERP_SIN_FLOOR:
        return f
    return slerp(f, target, beta)


def sgp_video(enh_feats, vis_feats, init_scores, bank, params: SgpParams) -> SgpResult:
    f = np.atleast_2d(np.asarray(enh_feats, dtype=np.float64))
    v = np.atleast_2d(np.asarray(vis_feats, dtype=np.float64))
    s = np.asarray(init_scores, dtype=np.float64)
    if not len(f) == len(v) == len(s) or len(f) == 0:
        raise DimensionMismatch("enhanced, visual and score sequences must share a positive length")
    t_total = len(f)

    interval = mad_interval(s, params)
    tri = tri_classify(s, interval)
    dom = vote_dominant(f, tri, bank, params, t_total)
    amb = np.flatnonzero(tri == Tri.AMB)

    if dom.fully_normal:
        is_abn = np.zeros(amb.shape, dtype=bool)
    else:
        attn = build_sparse_attention(v, params.attention)
        is_abn = neighbor_assign(amb, attn, f, dom, params.delta_margin)

    pulled = f.copy()
    betas = np.empty(amb.shape)
    for n, i in enumerate(amb):
        if is_abn[n]:
            target = dom.abn
        else:
            target = dom.norms[int(np.argmax(dom.norms @ f[i]))]
        betas[n] = adaptive_beta(float(s[i]), interval, params.beta_base)
        pulled[i] = _pull(f[i], target, betas[n])

    final = np.atleast_1d(vmf_score(pulled, bank))
    return SgpResult(final, pulled, interval, tri, dom, amb, is_abn, betas)
