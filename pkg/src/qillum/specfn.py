"""Special functions used across the toolkit.

Only what the error-probability pipeline needs: the lower real branch of the
Lambert W function, the gamma density of the heterodyne statistic, and
Laguerre polynomials for displaced-thermal photon statistics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erfc, gammainc, gammaln

__all__ = [
    "GammaDensityParams",
    "lambert_w_minus1",
    "gamma_logpdf",
    "gamma_pdf",
    "gamma_cdf",
    "gamma_sample",
    "laguerre",
    "scaled_laguerre",
    "gammaln",
    "erfc",
]

_INV_E = math.exp(-1.0)
# 1/e split into two doubles so that z + 1/e is exact near the branch point
_INV_E_LO = -1.2428753672788363e-17


@dataclass(frozen=True)
class GammaDensityParams:
    """Shape/scale pair of the gamma law followed by ``x = mu^2 |alpha|^2``.

    ``shape`` is the number of copies M and ``scale`` is ``2 * xi``.
    """

    shape: int
    scale: float

    def __post_init__(self):
        if int(self.shape) != self.shape or self.shape < 1:
            raise ValueError(f"gamma shape must be a positive integer, got {self.shape!r}")
        if not self.scale > 0 or not math.isfinite(self.scale):
            raise ValueError(f"gamma scale must be positive and finite, got {self.scale!r}")

    @property
    def mean(self) -> float:
        return self.shape * self.scale

    @property
    def std(self) -> float:
        return math.sqrt(self.shape) * self.scale


def lambert_w_minus1(z: float) -> float:
    """Lower real branch W_{-1}(z) for -1/e <= z < 0.

    Bisection on the bracket ``[2 ln(-z) - 1, -1]``, where ``w e^w`` is
    monotone, then a few Newton steps to polish the last bits. Within about
    1e-7 of the branch point the expansion in ``sqrt(2 (1 + e z))`` is used
    instead.
    """
    z = float(z)
    if not (z < 0.0) or z < -_INV_E * (1.0 + 4e-16):
        raise ValueError(f"lambert_w_minus1 needs -1/e <= z < 0, got {z!r}")
    if z <= -_INV_E:
        return -1.0

    # branch-point series in p = -sqrt(2 (1 + e z)); the bracket below is too flat there
    p = -math.sqrt(max(2.0 * math.e * ((z + _INV_E) + _INV_E_LO), 0.0))
    if p > -1e-3:
        return -1.0 + p * (1.0 + p * (-1.0 / 3.0 + p * (11.0 / 72.0 + p * (-43.0 / 540.0 + p * 769.0 / 17280.0))))

    lo = 2.0 * math.log(-z) - 1.0
    hi = -1.0
    # f(w) = w e^w - z is positive at lo and negative at hi
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        if mid * math.exp(mid) - z > 0.0:
            lo = mid
        else:
            hi = mid
    w = 0.5 * (lo + hi)

    for _ in range(4):
        ew = math.exp(w)
        deriv = (w + 1.0) * ew
        if deriv == 0.0:
            break
        step = (w * ew - z) / deriv
        w_new = w - step
        if not (w_new <= -1.0):
            break
        w = w_new
        if abs(step) <= 1e-16 * abs(w):
            break
    return w


def _stirling_tail(k: float) -> float:
    # ln Gamma(k) - [(k - 1/2) ln k - k + ln(2 pi)/2], asymptotic series, used for k >= 30
    r = 1.0 / k
    r2 = r * r
    return r * (1.0 / 12.0 - r2 * (1.0 / 360.0 - r2 * (1.0 / 1260.0 - r2 / 1680.0)))


def gamma_logpdf(x, p: GammaDensityParams):
    """Log of the gamma density, accurate for shapes up to ~1e9.

    For large shapes the textbook form subtracts terms of size ``k ln k``;
    here it is rearranged around the mean as ``k (ln1p(u) - u)`` with
    ``u = x / (k s) - 1`` plus a Stirling remainder, which keeps the log
    density accurate to a few ulps of its own size.
    """
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ValueError("gamma density is defined for x >= 0")
    k, s = p.shape, p.scale
    with np.errstate(divide="ignore", invalid="ignore"):
        if k == 1:
            out = -x / s - math.log(s)
        elif k < 30:
            out = (k - 1) * np.log(x) - x / s - k * math.log(s) - gammaln(k)
        else:
            t = x / (k * s)
            u = t - 1.0
            out = (
                k * (np.log1p(u) - u)
                - np.log(t)
                - 0.5 * math.log(k)
                - 0.5 * math.log(2.0 * math.pi)
                - _stirling_tail(k)
                - math.log(s)
            )
            out = np.where(x == 0, -np.inf, out)
    return out if out.ndim else float(out)


def gamma_pdf(x, p: GammaDensityParams):
    """Gamma density ``x^(M-1) exp(-x/s) / (s^M Gamma(M))`` evaluated in log space."""
    out = np.exp(gamma_logpdf(x, p))
    return out if np.ndim(out) else float(out)


def gamma_cdf(x, p: GammaDensityParams):
    x = np.asarray(x, dtype=float)
    out = gammainc(p.shape, np.maximum(x, 0.0) / p.scale)
    return out if out.ndim else float(out)


def gamma_sample(rng: np.random.Generator, p: GammaDensityParams, size=None):
    return rng.gamma(p.shape, p.scale, size=size)


def laguerre(n: int, x: float, alpha: float = 0.0) -> float:
    """Generalized Laguerre polynomial L_n^(alpha)(x) by upward recurrence."""
    if int(n) != n or n < 0:
        raise ValueError(f"Laguerre degree must be a nonnegative integer, got {n!r}")
    prev, cur = 0.0, 1.0
    for k in range(n):
        prev, cur = cur, ((2 * k + 1 + alpha - x) * cur - (k + alpha) * prev) / (k + 1)
    return cur


def scaled_laguerre(n_max: int, eps, y, alpha: int = 0, rescale: float = 1.0) -> np.ndarray:
    """Table of ``eps^n L_n^(alpha)(-y/eps) / rescale^n`` for n = 0..n_max.

    This is the combination that appears in displaced-thermal matrix elements.
    Every coefficient of the expanded polynomial is positive, so the scaled
    recurrence has no cancellation and stays finite as ``eps -> 0``, where it
    tends to ``y^n / n!``. ``rescale`` (typically ``1 + eps``) keeps large
    ``eps`` from overflowing. ``eps`` and ``y`` broadcast; the degree runs
    along the last axis of the result.
    """
    eps = np.asarray(eps, dtype=float) / rescale
    y = np.asarray(y, dtype=float) / rescale
    shape = np.broadcast(eps, y).shape
    out = np.empty(shape + (n_max + 1,))
    out[..., 0] = 1.0
    if n_max == 0:
        return out
    out[..., 1] = (1 + alpha) * eps + y
    for k in range(1, n_max):
        out[..., k + 1] = (
            ((2 * k + 1 + alpha) * eps + y) * out[..., k] - (k + alpha) * eps * eps * out[..., k - 1]
        ) / (k + 1)
    return out
