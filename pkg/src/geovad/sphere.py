"""Riemannian primitives on the unit hypersphere S^{D-1}.

Points are plain numpy arrays whose last axis is the ambient coordinate.  Most
functions accept either a single vector of shape ``(D,)`` or a batch of shape
``(n, D)`` and broadcast against a single base point.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    AntipodalPoint,
    AtBasePoint,
    DegenerateMean,
    HemisphereViolation,
    ZeroVector,
)

ZERO_NORM = 1e-12
SMALL_ANGLE = 1e-8
ANTIPODE_MARGIN = 1e-12
SLERP_SIN_FLOOR = 1e-6
SLERP_ANTIPODE = 1e-9
AT_BASE = 1e-9
HEMISPHERE_MARGIN = 1e-6

FRECHET_T_MAX = 5
FRECHET_EPS = 1e-7


def _dot(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.sum(a * b, axis=-1)


def normalize(v) -> np.ndarray:
    """Project ``v`` (or each row of ``v``) onto the unit sphere."""
    v = np.asarray(v, dtype=np.float64)
    norm = np.linalg.norm(v, axis=-1, keepdims=True)
    if np.any(norm < ZERO_NORM):
        raise ZeroVector("cannot normalize a vector with norm < 1e-12")
    return v / norm


def geodesic_distance(p, q) -> np.ndarray | float:
    """Great-circle distance ``arccos(<p, q>)`` in radians, in ``[0, pi]``."""
    c = np.clip(_dot(np.asarray(p, dtype=np.float64), np.asarray(q, dtype=np.float64)), -1.0, 1.0)
    d = np.arccos(c)
    return float(d) if np.ndim(d) == 0 else d


def log_map(base, x) -> np.ndarray:
    """Tangent vector at ``base`` pointing to ``x`` with norm equal to their distance.

    Below a 1e-8 rad separation the Euclidean difference ``x - base`` is
    returned (the small-angle limit).
    """
    base = np.asarray(base, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    c = _dot(base, x)
    if np.any(c < -1.0 + ANTIPODE_MARGIN):
        raise AntipodalPoint("log map undefined at the antipode of the base point")
    c = np.clip(c, -1.0, 1.0)
    theta = np.arccos(c)
    small = theta < SMALL_ANGLE
    sin_theta = np.sin(theta)
    coef = np.where(small, 1.0, theta / np.where(small, 1.0, sin_theta))
    coef = coef[..., None]
    c = c[..., None]
    delta = coef * (x - c * base)
    return np.where(small[..., None], x - base, delta)


def exp_map(base, v) -> np.ndarray:
    """Follow the geodesic from ``base`` with initial velocity ``v`` for unit time."""
    base = np.asarray(base, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    n = np.linalg.norm(v, axis=-1, keepdims=True)
    zero = n == 0.0
    safe = np.where(zero, 1.0, n)
    out = np.cos(n) * base + np.sin(n) * (v / safe)
    out = np.where(zero, np.broadcast_to(base, out.shape), out)
    # renormalise to absorb rounding in cos/sin; leaves zero-velocity rows bit-exact
    norm = np.linalg.norm(out, axis=-1, keepdims=True)
    return np.where(zero, out, out / norm)


def lerp_normalized(p, q, t: float) -> np.ndarray:
    """Euclidean blend ``(1-t) p + t q`` projected back onto the sphere."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if t == 0:
        return p.copy()
    if t == 1:
        return q.copy()
    return normalize((1.0 - t) * p + t * q)


def lerp_norm_sq(p, q, t: float) -> float:
    """Squared norm of the unnormalised blend; shrinks below 1 inside (0, 1)."""
    blend = (1.0 - t) * np.asarray(p, dtype=np.float64) + t * np.asarray(q, dtype=np.float64)
    return float(blend @ blend)


def slerp(p, q, t: float) -> np.ndarray:
    """Constant-speed great-circle interpolation from ``p`` (t=0) to ``q`` (t=1).

    Falls back to normalised LERP when ``sin(Omega) < 1e-6``.
    """
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if t == 0:
        return p.copy()
    if t == 1:
        return q.copy()
    omega = geodesic_distance(p, q)
    if omega > np.pi - SLERP_ANTIPODE:
        raise AntipodalPoint("slerp between antipodal points has no unique geodesic")
    sin_omega = np.sin(omega)
    if sin_omega < SLERP_SIN_FLOOR:
        return lerp_normalized(p, q, t)
    out = (np.sin((1.0 - t) * omega) * p + np.sin(t * omega) * q) / sin_omega
    return out / np.linalg.norm(out)


@dataclass
class FrechetResult:
    mean: np.ndarray
    iterations: int
    final_gradient_norm: float
    # objective sum_i d^2(mu, x_i) at every visited iterate, initialisation first
    objective: list[float] = field(default_factory=list)


def frechet_objective(mu, points) -> float:
    d = geodesic_distance(points, mu)
    return float(np.sum(np.square(d)))


def frechet_mean(points, t_max: int = FRECHET_T_MAX, eps: float = FRECHET_EPS) -> FrechetResult:
    """Karcher iteration with a full Riemannian gradient step.

    Starts from the normalised Euclidean mean and stops once the mean
    log-map has norm strictly below ``eps`` or ``t_max`` updates were made.
    """
    x = np.atleast_2d(np.asarray(points, dtype=np.float64))
    if x.shape[0] == 0:
        raise DegenerateMean("frechet_mean of an empty point set")
    euclid = x.mean(axis=0)
    if np.linalg.norm(euclid) < ZERO_NORM:
        raise DegenerateMean("Euclidean mean vanishes; no preferred direction")
    mu = euclid / np.linalg.norm(euclid)
    if np.max(geodesic_distance(x, mu)) >= np.pi / 2 - HEMISPHERE_MARGIN:
        raise HemisphereViolation("points are not contained in an open hemisphere around their mean")

    history = [frechet_objective(mu, x)]
    iterations = 0
    while True:
        g = log_map(mu, x).mean(axis=0)
        g_norm = float(np.linalg.norm(g))
        if g_norm < eps or iterations >= t_max:
            break
        mu = exp_map(mu, g)
        iterations += 1
        history.append(frechet_objective(mu, x))
    return FrechetResult(mu, iterations, g_norm, history)


def center(base, x) -> np.ndarray:
    """Direction of ``Log_base(x)``: the spherical centering map.

    Works row-wise on a batch; any row within 1e-9 rad of ``base`` raises
    :class:`AtBasePoint`.  Use :func:`center_many` to tolerate such rows.
    """
    base = np.asarray(base, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if np.any(geodesic_distance(base, x) < AT_BASE):
        raise AtBasePoint("point coincides with the centering base")
    return normalize(log_map(base, x))


def center_many(base, x) -> tuple[np.ndarray, np.ndarray]:
    """Center every row of ``x``; rows at the base are passed through normalised.

    Returns ``(centered, at_base_mask)``.
    """
    base = np.asarray(base, dtype=np.float64)
    x = normalize(np.atleast_2d(x))
    at_base = geodesic_distance(x, base) < AT_BASE
    out = x.copy()
    if np.any(~at_base):
        out[~at_base] = normalize(log_map(base, x[~at_base]))
    return out, at_base
