"""Layer saliency probing: pick the layer whose features best separate the two classes.

For each layer, each class's cosine similarities to its own normalised centroid
are summarised by a one-dimensional Gaussian.  Three separability metrics are
computed from the pair of Gaussians (symmetric KL, mean absolute log density
ratio, mean posterior binary entropy), Z-scored across layers, and fused as
``z_kl + z_ldr - z_entropy``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateVariance
from .sphere import normalize

MIN_VARIANCE = 1e-12


@dataclass
class LayerRecord:
    kl: float
    ldr: float
    entropy: float
    z_kl: float = 0.0
    z_ldr: float = 0.0
    z_entropy: float = 0.0
    composite: float = 0.0


@dataclass
class LayerSaliency:
    layers: list[LayerRecord]

    @property
    def composite(self) -> np.ndarray:
        return np.array([r.composite for r in self.layers])

    def rows(self):
        for i, r in enumerate(self.layers):
            yield (i, r.kl, r.ldr, r.entropy, r.z_kl, r.z_ldr, r.z_entropy, r.composite)


def _gauss_logpdf(x, mean, var):
    return -0.5 * (np.log(2.0 * np.pi * var) + (x - mean) ** 2 / var)


def _kl(m1, v1, m2, v2) -> float:
    return 0.5 * (np.log(v2 / v1) + (v1 + (m1 - m2) ** 2) / v2 - 1.0)


def _binary_entropy_bits(p: np.ndarray) -> np.ndarray:
    p = np.clip(p, 1e-300, 1.0)
    q = np.clip(1.0 - p, 1e-300, 1.0)
    return -(p * np.log2(p) + q * np.log2(q))


def layer_metrics(normal, abnormal, layer: int = 0) -> LayerRecord:
    x_n = normalize(np.atleast_2d(normal))
    x_a = normalize(np.atleast_2d(abnormal))
    s_n = x_n @ normalize(x_n.mean(axis=0))
    s_a = x_a @ normalize(x_a.mean(axis=0))
    m_n, v_n = float(s_n.mean()), float(s_n.var())
    m_a, v_a = float(s_a.mean()), float(s_a.var())
    if v_n < MIN_VARIANCE or v_a < MIN_VARIANCE:
        raise DegenerateVariance(layer)

    kl = _kl(m_n, v_n, m_a, v_a) + _kl(m_a, v_a, m_n, v_n)

    own = np.concatenate([_gauss_logpdf(s_n, m_n, v_n), _gauss_logpdf(s_a, m_a, v_a)])
    other = np.concatenate([_gauss_logpdf(s_n, m_a, v_a), _gauss_logpdf(s_a, m_n, v_n)])
    ldr = float(np.mean(np.abs(own - other)))

    s_all = np.concatenate([s_n, s_a])
    log_pn = _gauss_logpdf(s_all, m_n, v_n)
    log_pa = _gauss_logpdf(s_all, m_a, v_a)
    post_n = 1.0 / (1.0 + np.exp(np.clip(log_pa - log_pn, -700, 700)))
    entropy = float(np.mean(_binary_entropy_bits(post_n)))
    return LayerRecord(float(kl), ldr, entropy)


def _zscore(values: np.ndarray) -> np.ndarray:
    sd = values.std()  # population convention
    if values.size < 2 or sd == 0:
        return np.zeros_like(values)
    return (values - values.mean()) / sd


def dlsp_evaluate(per_layer_normal, per_layer_abn) -> LayerSaliency:
    if len(per_layer_normal) != len(per_layer_abn) or len(per_layer_normal) == 0:
        raise ValueError("need the same positive number of layers for both classes")
    records = [layer_metrics(n, a, i) for i, (n, a) in enumerate(zip(per_layer_normal, per_layer_abn))]
    z_kl = _zscore(np.array([r.kl for r in records]))
    z_ldr = _zscore(np.array([r.ldr for r in records]))
    z_ent = _zscore(np.array([r.entropy for r in records]))
    for r, a, b, c in zip(records, z_kl, z_ldr, z_ent):
        r.z_kl, r.z_ldr, r.z_entropy = float(a), float(b), float(c)
        r.composite = r.z_kl + r.z_ldr - r.z_entropy
    return LayerSaliency(records)


def select_layer(saliency: LayerSaliency | np.ndarray) -> int:
    comp = saliency.composite if isinstance(saliency, LayerSaliency) else np.asarray(saliency)
    return int(np.argmax(comp))
