"""Sparse cosine-similarity attention shared by cross-video and intra-video stages."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch
from .sphere import ZERO_NORM

TILE_ROWS = 512


@dataclass(frozen=True)
class AttentionParams:
    tau: float = 0.70
    top_k: int = 20
    temperature: float = 1.0
    exclude_self: bool = True

    def __post_init__(self):
        if not -1.0 <= self.tau <= 1.0:
            raise ValueError("tau must lie in [-1, 1]")
        if self.top_k < 1:
            raise ValueError("top_k must be >= 1")
        if self.temperature <= 0:
            raise ValueError("temperature must be > 0")


@dataclass
class SparseAttention:
    """Row-compressed attention: row ``i`` owns ``indices[indptr[i]:indptr[i+1]]``."""

    n: int
    indptr: np.ndarray
    indices: np.ndarray
    weights: np.ndarray

    def row(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        lo, hi = self.indptr[i], self.indptr[i + 1]
        return self.indices[lo:hi], self.weights[lo:hi]

    def row_sizes(self) -> np.ndarray:
        return np.diff(self.indptr)

    def edges(self) -> set[tuple[int, int]]:
        rows = np.repeat(np.arange(self.n), self.row_sizes())
        return set(zip(rows.tolist(), self.indices.tolist()))

    def to_dense(self) -> np.ndarray:
        dense = np.zeros((self.n, self.n))
        rows = np.repeat(np.arange(self.n), self.row_sizes())
        dense[rows, self.indices] = self.weights
        return dense

    def aggregate(self, feats: np.ndarray) -> np.ndarray:
        """``sum_j A_ij f_j`` for every row; empty rows give zeros."""
        rows = np.repeat(np.arange(self.n), self.row_sizes())
        out = np.zeros((self.n, feats.shape[1]))
        np.add.at(out, rows, self.weights[:, None] * feats[self.indices])
        return out


def _sparsify_row(sims: np.ndarray, i: int, params: AttentionParams):
    keep = sims >= params.tau
    if params.exclude_self:
        keep[i] = False
    cols = np.flatnonzero(keep)
    if cols.size > params.top_k:
        # stable sort on -sim breaks ties toward the lower column index
        order = np.argsort(-sims[cols], kind="stable")[: params.top_k]
        cols = np.sort(cols[order])
    if cols.size == 0:
        return cols, np.empty(0)
    logits = sims[cols] / params.temperature
    w = np.exp(logits - logits.max())
    return cols, w / w.sum()


def build_sparse_attention(feats, params: AttentionParams) -> SparseAttention:
    """Threshold at ``tau``, keep each row's ``top_k`` survivors, softmax per row.

    Similarities are computed in row tiles so peak memory is ``TILE_ROWS * n``.
    """
    x = np.atleast_2d(np.asarray(feats, dtype=np.float64))
    n = x.shape[0]
    if n == 0:
        raise ValueError("attention needs at least one feature")
    indptr = np.zeros(n + 1, dtype=np.int64)
    all_cols, all_w = [], []
    for start in range(0, n, TILE_ROWS):
        block = x[start : start + TILE_ROWS] @ x.T
        for r, sims in enumerate(block):
            cols, w = _sparsify_row(sims, start + r, params)
            all_cols.append(cols)
            all_w.append(w)
            indptr[start + r + 1] = indptr[start + r] + cols.size
    indices = np.concatenate(all_cols).astype(np.int64) if all_cols else np.empty(0, np.int64)
    weights = np.concatenate(all_w) if all_w else np.empty(0)
    return SparseAttention(n, indptr, indices, weights)


def hsa_enhance(main_feats, attn: SparseAttention, alpha_g: float) -> np.ndarray:
    """Blend each main feature with its attention-weighted neighbours, then renormalise.

    Rows without neighbours, and rows whose blend cancels to zero, keep their input.
    """
    x = np.atleast_2d(np.asarray(main_feats, dtype=np.float64))
    if x.shape[0] != attn.n:
        raise DimensionMismatch(f"{x.shape[0]} features but attention over {attn.n} nodes")
    out = x.copy()
    has = attn.row_sizes() > 0
    if not np.any(has):
        return out
    idx = np.flatnonzero(has)
    blend = (1.0 - alpha_g) * x[idx] + alpha_g * attn.aggregate(x)[idx]
    norms = np.linalg.norm(blend, axis=1)
    ok = norms >= ZERO_NORM
    out[idx[ok]] = blend[ok] / norms[ok, None]
    return out
