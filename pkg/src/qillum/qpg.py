"""Cavity-enhanced quantum pulse gate in the frequency domain.

Single cavity resonance, no intracavity loss. Mode ``n`` sits at
``omega_n = 2 pi n / T``; the gate maps the pump-shaped temporal mode ``A_n``
and the cavity input ``b_in_n`` onto the output ``b_out_n``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

__all__ = [
    "QpgSpec",
    "TransferPoint",
    "SelectivityReport",
    "matched_eta",
    "transfer",
    "transfer_window",
    "selectivity_report",
    "temporal_mode_overlap",
    "temporal_mode_coefficients",
    "autocorr_check",
    "crosstalk_bound",
]


@dataclass(frozen=True)
class QpgSpec:
    """Gate parameters; ``eta=None`` selects the matched coupling ``sqrt(gamma T)``."""

    gamma: float
    eta: Optional[float]
    duration: float
    pump_spectrum: tuple = (1.0 + 0j,)

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError(f"gamma must be positive, got {self.gamma!r}")
        if self.eta is not None and not self.eta >= 0:
            raise ValueError(f"eta must be >= 0, got {self.eta!r}")
        if not self.duration > 0:
            raise ValueError(f"duration must be positive, got {self.duration!r}")
        beta = np.asarray(self.pump_spectrum, dtype=complex)
        if beta.size == 0 or abs(np.vdot(beta, beta).real - 1.0) > 1e-10:
            raise ValueError("pump spectrum must be normalized: sum |beta_n|^2 = 1")
        object.__setattr__(self, "pump_spectrum", tuple(complex(b) for b in beta))

    @property
    def coupling_rate(self) -> float:
        """Cavity-output coupling ``K = sqrt(gamma / T)``."""
        return math.sqrt(self.gamma / self.duration)

    @property
    def mode_spacing(self) -> float:
        return 2.0 * math.pi / self.duration

    @property
    def impedance_ratio(self) -> float:
        """``u = eta^2 / (gamma T)``; 1 is the matched gate."""
        if self.eta is None:
            return 1.0
        return self.eta**2 / (self.gamma * self.duration)

    @property
    def matched(self) -> bool:
        return abs(self.impedance_ratio - 1.0) <= 1e-9


@dataclass(frozen=True)
class TransferPoint:
    n: int
    omega: float
    t_coeff: complex
    r_coeff: complex


@dataclass(frozen=True)
class SelectivityReport:
    conversion_0: float
    worst_crosstalk: float
    matched: bool
    t0: complex


def matched_eta(gamma: float, duration: float) -> float:
    """Coupling that balances conversion against cavity decay, ``eta = sqrt(gamma T)``."""
    return math.sqrt(gamma * duration)


def transfer(spec: QpgSpec, n: int) -> TransferPoint:
    """Coefficients of ``A_n`` and ``b_in_n`` in ``b_out_n``.

    In units of ``gamma / 2`` with ``u = eta^2 / (gamma T)`` and ``v = 2 omega_n / gamma``::

        t = 2 sqrt(u) / (-(1 + u) + i v),   r = ((1 - u) + i v) / (-(1 + u) + i v)

    which is the dimensional form multiplied through by ``2 / gamma``.
    """
    u = spec.impedance_ratio
    w = 2.0 * math.pi * n / spec.duration
    v = 2.0 * w / spec.gamma
    den = complex(-(1.0 + u), v)
    t = 2.0 * math.sqrt(u) / den
    r = complex(1.0 - u, v) / den
    return TransferPoint(int(n), w, t, r)


def transfer_window(spec: QpgSpec, half_width: int) -> list[TransferPoint]:
    return [transfer(spec, n) for n in range(-half_width, half_width + 1)]


def crosstalk_bound(spec: QpgSpec) -> float:
    """Matched-case leakage into the nearest neighbour, ``u^2 / (1 + u^2)`` with ``u = gamma T / 2 pi``."""
    u = spec.gamma * spec.duration / (2.0 * math.pi)
    return u * u / (1.0 + u * u)


def selectivity_report(spec: QpgSpec, window: int = 100) -> SelectivityReport:
    """On-resonance conversion and the worst leakage over ``0 < |n| <= window``."""
    t0 = transfer(spec, 0).t_coeff
    worst = max(abs(transfer(spec, n).t_coeff) ** 2 for n in range(-window, window + 1) if n != 0)
    return SelectivityReport(abs(t0) ** 2, worst, spec.matched, t0)


def temporal_mode_coefficients(pump: Sequence[complex], n: int = 0) -> np.ndarray:
    """Coefficients ``c_l`` of ``A_n = sum_l beta_{n-l} a_l`` over the same index window.

    ``pump`` is indexed symmetrically, ``pump[j]`` holding ``beta_{j - L}`` for
    an odd length ``2L + 1``; the result uses the same indexing for ``l``.
    """
    beta = np.asarray(pump, dtype=complex)
    if beta.size % 2 != 1:
        raise ValueError("pump spectrum needs odd length (symmetric index window)")
    half = beta.size // 2
    out = np.zeros_like(beta)
    for j in range(beta.size):
        k = n - (j - half) + half
        if 0 <= k < beta.size:
            out[j] = beta[k]
    return out


def temporal_mode_overlap(pump: Sequence[complex], idler_weights: Sequence[complex]) -> complex:
    """Mode overlap ``[A_0, W^dag]`` of ``A_0`` with ``W = sum_l w_l a_l``.

    Both sequences use the symmetric indexing of
    :func:`temporal_mode_coefficients`; the result is ``sum_l beta_{-l} conj(w_l)``,
    which has modulus 1 exactly when the gate selects ``W``.
    """
    beta = np.asarray(pump, dtype=complex)
    w = np.asarray(idler_weights, dtype=complex)
    if beta.shape != w.shape:
        raise ValueError(f"length mismatch: {beta.shape} vs {w.shape}")
    return complex(np.dot(temporal_mode_coefficients(beta, 0), w.conj()))


def autocorr_check(beta: Sequence[complex], shift: int) -> float:
    """``|sum_m beta*_{m+shift} beta_m|``, the residual of the delta approximation."""
    b = np.asarray(beta, dtype=complex)
    s = int(shift)
    if abs(s) >= b.size:
        return 0.0
    if s >= 0:
        return float(abs(np.vdot(b[s:], b[: b.size - s])))
    return float(abs(np.vdot(b[: b.size + s], b[-s:])))
