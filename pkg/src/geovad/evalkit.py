"""Frame-level ranking metrics, class-separability statistics and the grid-sweep harness."""

from __future__ import annotations

import csv
import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from .config import KEYS, PipelineConfig, apply_overrides, coerce_value
from .errors import NoPositives, ParseError, SingleClass, UnknownKey
from .sphere import normalize
from .vmf import nearest_distances, vmf_score

OVERLAP_BINS = 64


def _as_binary(labels) -> np.ndarray:
    y = np.asarray(labels).astype(np.int64)
    if not np.all((y == 0) | (y == 1)):
        raise ValueError("labels must be 0 or 1")
    return y


def roc_auc(scores, labels) -> float:
    """Probability a random positive outranks a random negative; ties count one half."""
    s = np.asarray(scores, dtype=np.float64)
    y = _as_binary(labels)
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise SingleClass("AUC needs both positive and negative labels")
    ranks = rankdata(s)  # average ranks give ties one half
    u = ranks[y == 1].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def average_precision(scores, labels) -> float:
    """Step-function area under precision-recall; ties keep their original order."""
    s = np.asarray(scores, dtype=np.float64)
    y = _as_binary(labels)
    n_pos = int(y.sum())
    if n_pos == 0:
        raise NoPositives("AP needs at least one positive")
    order = np.argsort(-s, kind="stable")
    hits = y[order]
    ranks = np.flatnonzero(hits) + 1
    precision = np.arange(1, n_pos + 1) / ranks
    return float(precision.sum() / n_pos)


@dataclass(frozen=True)
class SeparabilityStats:
    delta_mu: float
    sigma_delta: float
    fisher: float
    score_overlap: float


def geodesic_gap_deg(feats, bank) -> np.ndarray:
    """Per-sample ``d(x, nearest normal) - d(x, nearest anomalous)`` in degrees."""
    x = normalize(np.atleast_2d(feats))
    return np.degrees(nearest_distances(x, bank.norm_protos) - nearest_distances(x, bank.abn_protos))


def overlap_coefficient(a, b, bins: int = OVERLAP_BINS) -> float:
    edges = np.linspace(0.0, 1.0, bins + 1)
    ha = np.histogram(np.clip(a, 0, 1), edges)[0] / len(a)
    hb = np.histogram(np.clip(b, 0, 1), edges)[0] / len(b)
    return float(np.minimum(ha, hb).sum())


def separability_stats(feats, labels, bank, scores=None, bins: int = OVERLAP_BINS) -> SeparabilityStats:
    y = _as_binary(labels)
    if y.min() == y.max():
        raise SingleClass("separability needs both classes")
    delta = geodesic_gap_deg(feats, bank)
    if scores is None:
        scores = np.atleast_1d(vmf_score(normalize(np.atleast_2d(feats)), bank))
    scores = np.asarray(scores, dtype=np.float64)
    d_a, d_n = delta[y == 1], delta[y == 0]
    m_a, m_n = d_a.mean(), d_n.mean()
    v_a, v_n = d_a.var(), d_n.var()
    # population variances weighted by class size
    pooled = np.sqrt((len(d_a) * v_a + len(d_n) * v_n) / len(delta))
    denom = v_a + v_n
    fisher = (m_a - m_n) ** 2 / denom if denom > 0 else (0.0 if m_a == m_n else float("inf"))
    return SeparabilityStats(
        float(abs(m_a - m_n)), float(pooled), float(fisher),
        overlap_coefficient(scores[y == 1], scores[y == 0], bins),
    )


def parse_grid_text(text: str) -> dict[str, list]:
    """Grid file: one ``key = v1, v2, ...`` per line, ``#`` comments."""
    grid: dict[str, list] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError("expected key = v1, v2, ...", lineno)
        key, raw = (p.strip() for p in line.split("=", 1))
        if key not in KEYS:
            raise UnknownKey(key, lineno)
        try:
            grid[key] = [coerce_value(key, v) for v in raw.split(",") if v.strip()]
        except ValueError as exc:
            raise ParseError(f"bad value for {key}: {exc}", lineno) from exc
        if not grid[key]:
            raise ParseError(f"no values for {key}", lineno)
    return grid


def grid_points(grid: dict[str, list]) -> list[dict[str, object]]:
    if not grid or any(len(v) == 0 for v in grid.values()):
        raise ValueError("sweep grid must be nonempty")
    keys = list(grid)
    return [dict(zip(keys, combo)) for combo in itertools.product(*(grid[k] for k in keys))]


@dataclass
class SweepRow:
    index: int
    point: dict[str, object]
    auc: float
    ap: float


def sweep(dataset, syn_normal, syn_abn, base_config: PipelineConfig, grid: dict[str, list],
          threads: int = 1) -> list[SweepRow]:
    """Run the offline pipeline at every grid point; rows come back in grid order."""
    from .pipeline import run_offline

    points = grid_points(grid)
    labels = dataset.frame_labels()

    def one(item):
        idx, point = item
        cfg = apply_overrides(base_config, point)
        s = run_offline(dataset, syn_normal, syn_abn, cfg).frame_scores()
        return SweepRow(idx, point, roc_auc(s, labels), average_precision(s, labels))

    items = list(enumerate(points))
    if threads > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(one, items))
    return [one(it) for it in items]


def write_sweep_csv(rows: list[SweepRow], path) -> None:
    keys = list(rows[0].point) if rows else []
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["index", *keys, "auc", "ap"])
        for r in rows:
            w.writerow([r.index, *(r.point[k] for k in keys), repr(r.auc), repr(r.ap)])
