"""von Mises-Fisher directional model: log-density, likelihood-ratio score, sampler."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .errors import EmptyBank
from .sphere import normalize

# keeps scores inside the open interval even when kappa * gap saturates float64
_SCORE_LO = np.finfo(np.float64).tiny
_SCORE_HI = 1.0 - np.finfo(np.float64).epsneg


@dataclass
class VmfParams:
    mu: np.ndarray
    kappa: float

    def __post_init__(self):
        self.mu = normalize(self.mu)
        if self.kappa < 0:
            raise ValueError("kappa must be non-negative")


def vmf_log_density_unnormalized(x, params: VmfParams):
    """``kappa * <mu, x>``; the Bessel normaliser is deliberately omitted."""
    val = params.kappa * np.sum(np.asarray(x, dtype=np.float64) * params.mu, axis=-1)
    return float(val) if np.ndim(val) == 0 else val


def nearest_distances(f, protos) -> np.ndarray:
    """Geodesic distance from each row of ``f`` to its nearest prototype."""
    f = np.atleast_2d(np.asarray(f, dtype=np.float64))
    sims = np.clip(f @ np.asarray(protos, dtype=np.float64).T, -1.0, 1.0)
    return np.arccos(sims.max(axis=1))


def score_from_gap(gap, kappa: float):
    """Logistic of ``kappa * (d_norm - d_abn)``, clamped into (0, 1)."""
    s = np.clip(expit(kappa * np.asarray(gap, dtype=np.float64)), _SCORE_LO, _SCORE_HI)
    return float(s) if np.ndim(s) == 0 else s


def vmf_score(f, bank):
    """Anomaly score of a feature (or a batch of features) against a prototype bank.

    Equivalent to the two-class softmax over ``exp(-kappa * d_c)`` where
    ``d_c`` is the distance to the nearest prototype of class ``c``.
    """
    if len(bank.norm_protos) == 0 or len(bank.abn_protos) == 0:
        raise EmptyBank("prototype bank needs at least one prototype per class")
    single = np.ndim(f) == 1
    d_norm = nearest_distances(f, bank.norm_protos)
    d_abn = nearest_distances(f, bank.abn_protos)
    s = score_from_gap(d_norm - d_abn, bank.kappa)
    return float(s[0]) if single else s


def _tangent_directions(mu: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
    z = rng.standard_normal((n, mu.shape[0]))
    z -= np.outer(z @ mu, mu)
    return z / np.linalg.norm(z, axis=1, keepdims=True)


def _sample_cosines(kappa: float, dim: int, n: int, rng: np.random.Generator) -> np.ndarray:
    # Wood (1994) rejection sampler for w = <mu, x>
    m1 = dim - 1.0
    b = m1 / (2.0 * kappa + np.sqrt(4.0 * kappa**2 + m1**2))
    x0 = (1.0 - b) / (1.0 + b)
    c = kappa * x0 + m1 * np.log(1.0 - x0**2)
    out = np.empty(n)
    filled = 0
    while filled < n:
        need = n - filled
        batch = max(16, int(need * 1.3))
        z = rng.beta(m1 / 2.0, m1 / 2.0, size=batch)
        w = (1.0 - (1.0 + b) * z) / (1.0 - (1.0 - b) * z)
        u = rng.uniform(size=batch)
        ok = kappa * w + m1 * np.log(1.0 - x0 * w) - c >= np.log(u)
        acc = w[ok][:need]
        out[filled : filled + acc.size] = acc
        filled += acc.size
    return out


def sample_vmf(params: VmfParams, n: int, seed) -> np.ndarray:
    """Draw ``n`` samples from vMF(mu, kappa); deterministic for a fixed seed.

    ``seed`` may be an int or an existing ``numpy.random.Generator``.
    """
    mu = params.mu
    dim = mu.shape[0]
    if n < 1 or dim < 2:
        raise ValueError("need n >= 1 and dimension >= 2")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    if params.kappa == 0:
        return normalize(rng.standard_normal((n, dim)))
    w = _sample_cosines(params.kappa, dim, n, rng)
    v = _tangent_directions(mu, n, rng)
    x = w[:, None] * mu + np.sqrt(np.clip(1.0 - w**2, 0.0, None))[:, None] * v
    return normalize(x)


def mean_resultant_length(x) -> float:
    return float(np.linalg.norm(np.asarray(x, dtype=np.float64).mean(axis=0)))
