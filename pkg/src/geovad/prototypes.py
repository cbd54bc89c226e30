"""Spherical K-Means prototype calibration and the binary prototype-bank format."""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import BadMagic, DimensionMismatch, NonFiniteValue, TooFewPoints, TruncatedFile
from .sphere import normalize

N_INIT = 10
MAX_ITER = 100
SEED = 42

BANK_MAGIC = b"GVPB"
BANK_VERSION = 1
_BANK_HEADER = struct.Struct("<4sIIIId")


@dataclass
class PrototypeBank:
    norm_protos: np.ndarray
    abn_protos: np.ndarray
    kappa: float = 10.0

    def __post_init__(self):
        self.norm_protos = np.atleast_2d(np.asarray(self.norm_protos, dtype=np.float64))
        self.abn_protos = np.atleast_2d(np.asarray(self.abn_protos, dtype=np.float64))
        if self.norm_protos.shape[1] != self.abn_protos.shape[1]:
            raise DimensionMismatch("normal and anomalous prototypes differ in dimension")

    @property
    def dim(self) -> int:
        return self.norm_protos.shape[1]

    @property
    def k_n(self) -> int:
        return self.norm_protos.shape[0]

    @property
    def k_a(self) -> int:
        return self.abn_protos.shape[0]


@dataclass
class KMeansResult:
    centers: np.ndarray
    labels: np.ndarray
    objective: float
    restart: int
    # per restart: total within-cluster cosine after every assignment step
    history: list[list[float]] = field(default_factory=list)


def _assign(x: np.ndarray, centers: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    sims = x @ centers.T
    labels = np.argmax(sims, axis=1)  # first maximum wins: lowest prototype index
    return labels, sims[np.arange(len(x)), labels]


def _update(x: np.ndarray, labels: np.ndarray, best: np.ndarray, centers: np.ndarray) -> np.ndarray:
    k = centers.shape[0]
    sums = np.zeros_like(centers)
    np.add.at(sums, labels, x)
    counts = np.bincount(labels, minlength=k)
    new = centers.copy()
    taken: set[int] = set()
    # farthest-point repair for empty clusters, in cluster index order
    order = np.argsort(best, kind="stable")
    for j in range(k):
        if counts[j] > 0:
            norm = np.linalg.norm(sums[j])
            if norm > 1e-12:
                new[j] = sums[j] / norm
            continue
        for idx in order:
            if int(idx) not in taken:
                taken.add(int(idx))
                new[j] = x[idx]
                break
    return new


def _run_once(x: np.ndarray, k: int, rng: np.random.Generator, max_iter: int):
    init = rng.choice(len(x), size=k, replace=False)
    centers = x[init].copy()
    labels, best = _assign(x, centers)
    history = [float(best.sum())]
    for _ in range(max_iter):
        centers = _update(x, labels, best, centers)
        new_labels, best = _assign(x, centers)
        history.append(float(best.sum()))
        if np.array_equal(new_labels, labels):
            labels = new_labels
            break
        labels = new_labels
    return centers, labels, history


def fit_spherical_kmeans(points, k: int, seed: int = SEED, n_init: int = N_INIT,
                         max_iter: int = MAX_ITER) -> KMeansResult:
    """Cosine-assignment K-Means with normalised-mean updates and seeded restarts.

    Restart ``r`` draws its initial centroids from ``default_rng([seed, r])``;
    the restart with the largest total cosine similarity wins, earliest on ties.
    """
    x = normalize(np.atleast_2d(points))
    if k < 1:
        raise ValueError("k must be >= 1")
    if len(x) < k:
        raise TooFewPoints(f"{len(x)} points cannot form {k} clusters")
    result = None
    histories = []
    for r in range(n_init):
        centers, labels, hist = _run_once(x, k, np.random.default_rng([seed, r]), max_iter)
        histories.append(hist)
        obj = hist[-1]
        if result is None or obj > result.objective:
            result = KMeansResult(centers, labels, obj, r)
    result.history = histories
    return result


def spherical_kmeans(points, k: int, seed: int = SEED, n_init: int = N_INIT,
                     max_iter: int = MAX_ITER) -> np.ndarray:
    return fit_spherical_kmeans(points, k, seed, n_init, max_iter).centers


def calibrate(normal_feats, abn_feats, k_n: int, k_a: int, kappa: float = 10.0,
              seed: int = SEED, n_init: int = N_INIT, max_iter: int = MAX_ITER) -> PrototypeBank:
    """Cluster each class on its own into ``k_n`` normal and ``k_a`` anomalous prototypes."""
    norm = spherical_kmeans(normal_feats, k_n, seed, n_init, max_iter)
    abn = spherical_kmeans(abn_feats, k_a, seed, n_init, max_iter)
    return PrototypeBank(norm, abn, kappa)


def bank_to_bytes(bank: PrototypeBank) -> bytes:
    header = _BANK_HEADER.pack(BANK_MAGIC, BANK_VERSION, bank.dim, bank.k_n, bank.k_a, float(bank.kappa))
    body = np.concatenate([bank.norm_protos.ravel(), bank.abn_protos.ravel()]).astype("<f4")
    return header + body.tobytes()


def bank_from_bytes(buf: bytes) -> PrototypeBank:
    if len(buf) < 4:
        raise TruncatedFile("prototype bank shorter than its magic")
    if buf[:4] != BANK_MAGIC:
        raise BadMagic(f"expected {BANK_MAGIC!r}, got {buf[:4]!r}")
    if len(buf) < _BANK_HEADER.size:
        raise TruncatedFile("prototype bank header truncated")
    _, version, dim, k_n, k_a, kappa = _BANK_HEADER.unpack_from(buf)
    if version != BANK_VERSION:
        raise BadMagic(f"unsupported bank version {version}")
    n = (k_n + k_a) * dim
    end = _BANK_HEADER.size + 4 * n
    if len(buf) < end:
        raise TruncatedFile("prototype bank payload truncated")
    vals = np.frombuffer(buf, dtype="<f4", count=n, offset=_BANK_HEADER.size)
    bad = np.flatnonzero(~np.isfinite(vals))
    if bad.size:
        raise NonFiniteValue(_BANK_HEADER.size + 4 * int(bad[0]))
    if not np.isfinite(kappa):
        raise NonFiniteValue(_BANK_HEADER.size - 8)
    vals = vals.astype(np.float64)
    return PrototypeBank(vals[: k_n * dim].reshape(k_n, dim), vals[k_n * dim :].reshape(k_a, dim), kappa)


def write_bank(bank: PrototypeBank, path) -> None:
    Path(path).write_bytes(bank_to_bytes(bank))


def read_bank(path) -> PrototypeBank:
    return bank_from_bytes(Path(path).read_bytes())
