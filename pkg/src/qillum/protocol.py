"""Scenario parameters and closed-form channel/conditional-state statistics."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from .fock import TOL_TRUNC, displaced_thermal_pmf

__all__ = [
    "ProtocolParams",
    "ConditionalState",
    "FadingSpec",
    "conditional_params",
    "heterodyne_variance",
    "combine_displacement",
    "combining_weights",
    "fading_average_pmf",
]


@dataclass(frozen=True)
class ProtocolParams:
    """One illumination scenario.

    Attributes
    ----------
    n_s : float
        Mean signal photons per mode (brightness).
    kappa : float
        Target reflectivity, in [0, 1].
    theta : float
        Round-trip phase shift in radians.
    n_b : float
        Background photons in the return mode, already scaled so the return
        carries ``n_b`` regardless of ``kappa``.
    m : int
        Number of signal-idler mode pairs.
    """

    n_s: float
    kappa: float
    n_b: float
    m: int = 1
    theta: float = 0.0

    def __post_init__(self):
        if not (self.n_s >= 0 and math.isfinite(self.n_s)):
            raise ValueError(f"n_s must be >= 0, got {self.n_s!r}")
        if not 0.0 <= self.kappa <= 1.0:
            raise ValueError(f"kappa must lie in [0, 1], got {self.kappa!r}")
        if not (self.n_b >= 0 and math.isfinite(self.n_b)):
            raise ValueError(f"n_b must be >= 0, got {self.n_b!r}")
        if int(self.m) != self.m or self.m < 1:
            raise ValueError(f"m must be a positive integer, got {self.m!r}")
        object.__setattr__(self, "m", int(self.m))

    def with_m(self, m: int) -> "ProtocolParams":
        return replace(self, m=int(m))

    def with_kappa(self, kappa: float) -> "ProtocolParams":
        return replace(self, kappa=kappa)


@dataclass(frozen=True)
class ConditionalState:
    """Post-heterodyne idler statistics.

    ``mu`` converts a heterodyne outcome into idler displacement, ``xi`` is
    half the gamma scale of ``x = mu^2 |alpha|^2``, ``e_therm`` is the
    residual thermal occupancy and ``displacement`` is the combined
    single-mode displacement (zero until :func:`combine_displacement`).
    """

    mu: float
    xi: float
    e_therm: float
    displacement: complex = 0j

    @property
    def x(self) -> float:
        return abs(self.displacement) ** 2


@dataclass(frozen=True)
class FadingSpec:
    """Finite reflectivity law: (kappa, weight) pairs plus a phase model tag."""

    kappa_grid: tuple
    phase_model: str = "fixed"

    def __post_init__(self):
        grid = tuple((float(k), float(w)) for k, w in self.kappa_grid)
        if not grid:
            raise ValueError("fading grid is empty")
        ws = np.array([w for _, w in grid])
        if np.any(ws < 0) or abs(ws.sum() - 1.0) > 1e-12:
            raise ValueError(f"fading weights must be nonnegative and sum to 1, got sum {ws.sum()!r}")
        if any(not 0.0 <= k <= 1.0 for k, _ in grid):
            raise ValueError("fading reflectivities must lie in [0, 1]")
        if self.phase_model not in ("fixed", "uniform"):
            raise ValueError(f"phase model must be 'fixed' or 'uniform', got {self.phase_model!r}")
        object.__setattr__(self, "kappa_grid", grid)


def conditional_params(p: ProtocolParams) -> ConditionalState:
    """Conversion coefficient, gamma scale and residual noise of the conditional idler."""
    ns, k, nb = p.n_s, p.kappa, p.n_b
    denom = k * ns + nb + 1.0
    mu = math.sqrt(k * ns * (ns + 1.0)) / denom
    xi = k * ns * (ns + 1.0) / (2.0 * denom)
    e = ns * (nb + k - 1.0) / denom
    return ConditionalState(mu=mu, xi=xi, e_therm=e)


def heterodyne_variance(p: ProtocolParams) -> float:
    """Per-quadrature variance of each heterodyne outcome, so ``E|alpha|^2 = n_b + kappa n_s + 1``."""
    return 0.5 * (p.n_b + p.kappa * p.n_s + 1.0)


def combining_weights(alphas: Sequence[complex]) -> np.ndarray:
    """Beamsplitter-array weights ``alpha_m / |alpha|``; all zero for an all-zero record."""
    a = np.asarray(alphas, dtype=complex)
    norm = float(np.linalg.norm(a))
    if norm == 0.0:
        return np.zeros_like(a)
    return a / norm


def combine_displacement(c: ConditionalState, alphas: Sequence[complex], theta: float) -> ConditionalState:
    """Merge the per-mode conditional idlers into one displaced thermal mode.

    The combined displacement is ``mu e^{i theta} |alpha|``; its squared
    magnitude is the statistic ``x`` that enters the error integral.
    """
    a = np.asarray(alphas, dtype=complex)
    if a.size < 1:
        raise ValueError("need at least one heterodyne outcome")
    norm = float(np.linalg.norm(a))
    return replace(c, displacement=c.mu * norm * complex(math.cos(theta), math.sin(theta)))


def fading_average_pmf(
    p: ProtocolParams, f: FadingSpec, x: float, n_max: Optional[int] = None, tol: float = TOL_TRUNC
) -> np.ndarray:
    """Photon-count law of the combined idler averaged over a reflectivity grid.

    ``x`` is the statistic at the nominal reflectivity ``p.kappa``; each grid
    point rescales it by ``mu_k^2 / mu^2`` (same heterodyne record, different
    conversion) and uses its own residual noise. The phase model does not
    enter: photon counts are phase-blind. With ``n_max=None`` a shared cutoff
    is grown until every component keeps at least ``1 - tol`` of its mass.
    """
    if x < 0:
        raise ValueError("x must be >= 0")
    ref = conditional_params(p)
    comps = []
    for kappa, w in f.kappa_grid:
        ck = conditional_params(p.with_kappa(kappa))
        if ref.mu == 0.0:
            if x != 0.0:
                raise ValueError("nominal reflectivity is zero, cannot rescale a nonzero x")
            xk = 0.0
        else:
            xk = x * (ck.mu / ref.mu) ** 2
        comps.append((w, xk, max(ck.e_therm, 0.0)))

    if n_max is None:
        n_max = 8
        while True:
            ok = all(displaced_thermal_pmf(xk, e, n_max).sum() >= 1 - tol for _, xk, e in comps)
            if ok:
                break
            n_max = int(n_max * 1.5) + 1
    out = np.zeros(n_max + 1)
    for w, xk, e in comps:
        out += w * displaced_thermal_pmf(xk, e, n_max)
    return out
