"""Frequency-mode SPDC source: Bogoliubov coefficients, mode counting, bandwidth."""

from __future__ import annotations

import cmath
import math
import warnings
from dataclasses import dataclass

__all__ = ["SourceSpec", "BogoliubovPair", "bogoliubov", "mode_count", "bandwidth_from_mismatch", "pair_correlation"]


@dataclass(frozen=True)
class SourceSpec:
    """Single-frequency-pumped downconverter observed for ``duration`` seconds.

    ``coupling`` is the complex product of nonlinear strength and crystal
    length. ``bandwidth`` is angular (rad/s). ``mismatch_coeff`` is ``c2`` in
    the quadratic phase-mismatch model ``dk(w) L = c2 w^2`` (units s^2).
    """

    coupling: complex = 0j
    duration: float = 1.0
    bandwidth: float = 1.0
    mismatch_coeff: float = 0.0

    def __post_init__(self):
        if not self.duration > 0:
            raise ValueError(f"duration must be positive, got {self.duration!r}")
        if not self.bandwidth > 0:
            raise ValueError(f"bandwidth must be positive, got {self.bandwidth!r}")
        if self.mismatch_coeff < 0:
            raise ValueError("mismatch coefficient must be >= 0")
        object.__setattr__(self, "coupling", complex(self.coupling))


@dataclass(frozen=True)
class BogoliubovPair:
    g_coeff: float
    g_small: complex
    n_s: float

    @property
    def commutator_defect(self) -> float:
        """``G^2 - |g|^2 - 1``; zero up to rounding for a valid transformation."""
        return self.g_coeff**2 - abs(self.g_small) ** 2 - 1.0


def bogoliubov(spec: SourceSpec) -> BogoliubovPair:
    """Output coefficients ``G = cosh|zL|``, ``g = e^{i arg zL} sinh|zL|``."""
    r = abs(spec.coupling)
    if r == 0:
        return BogoliubovPair(1.0, 0j, 0.0)
    sh = math.sinh(r)
    return BogoliubovPair(math.cosh(r), cmath.exp(1j * cmath.phase(spec.coupling)) * sh, sh * sh)


def pair_correlation(pair: BogoliubovPair) -> float:
    """Signal-idler correlation ``|<a_S a_I>| = G |g| = sqrt(N_S (N_S + 1))``."""
    return pair.g_coeff * abs(pair.g_small)


def mode_count(spec: SourceSpec) -> tuple[int, int]:
    """Half-count ``l = floor(Omega T / 4 pi)`` and pair count ``M = 2 l + 1``."""
    v = spec.bandwidth * spec.duration / (4.0 * math.pi)
    # absorb rounding so exact multiples of 4 pi are not floored one short
    l = int(math.floor(v * (1.0 + 1e-12)))
    if l < 1:
        warnings.warn(f"band too narrow for a mode pair (Omega T / 4 pi = {v:.3g}); l = 0", RuntimeWarning)
        l = 0
    return l, 2 * l + 1


def bandwidth_from_mismatch(spec: SourceSpec, budget: float) -> float:
    """Full angular width over which ``c2 w^2`` stays below ``budget``.

    Returns ``inf`` (with a warning) when there is no mismatch at all.
    """
    if budget < 0:
        raise ValueError("mismatch budget must be >= 0")
    if spec.mismatch_coeff == 0:
        warnings.warn("zero mismatch coefficient: bandwidth is unbounded", RuntimeWarning)
        return math.inf
    return 2.0 * math.sqrt(budget / spec.mismatch_coeff)
