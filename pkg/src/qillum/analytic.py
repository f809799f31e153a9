"""Error probabilities and error exponents for the conversion receiver and its baselines.

Every receiver that sees the combined idler is scored by averaging a per-``x``
error over the gamma law of ``x = mu^2 |alpha|^2``. That outer integral uses
Gauss-Legendre on a window around the bulk of the law; when the window
reaches zero it is split into log-spaced segments so the ``sqrt(x)`` kink of
the Helstrom error near the origin is resolved.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np
from scipy.special import erfc, gammaincinv, gammainccinv

from .fock import (
    StateSpec,
    TruncationError,
    build_state,
    displaced_thermal_pmf,
    helstrom,
    helstrom_thermal_displaced,
    required_cutoff,
)
from .protocol import ProtocolParams, conditional_params
from .specfn import GammaDensityParams, gamma_pdf, lambert_w_minus1

__all__ = [
    "ConvergenceError",
    "QuadSettings",
    "ErrorCurve",
    "ThresholdPlan",
    "outer_rule",
    "p_cd",
    "p_cd_dephased",
    "p_ng",
    "ng_exponent",
    "p_ci",
    "photon_count_error",
    "photon_count_errors",
    "best_photon_count",
    "optimal_threshold",
    "threshold_transition",
    "homodyne_threshold",
    "homodyne_error_given_x",
    "homodyne_error",
    "error_exponents",
    "compute_error_curve",
    "fit_exponent",
    "log_grid",
]

# trace budget for the Helstrom integrand; tighter than fock.TOL_TRUNC because
# the integrand is tiny deep in the asymptotic regime
HELSTROM_TOL = 1e-13
CI_TOL = 1e-10


class ConvergenceError(ArithmeticError):
    """A numerical ladder (cutoff or quadrature) failed to meet its tolerance."""


@dataclass(frozen=True)
class QuadSettings:
    nodes: int = 128
    window_sigmas: float = 12.0
    head_segments: int = 6

    def __post_init__(self):
        if self.nodes < 64:
            raise ValueError(f"outer quadrature needs at least 64 nodes, got {self.nodes}")

    def doubled(self) -> "QuadSettings":
        return replace(self, nodes=2 * self.nodes)


@dataclass(frozen=True)
class ThresholdPlan:
    """Photon-count decision threshold for a scenario.

    ``n_opt_real`` is the continuous threshold ``2 mu^2 (kappa N_S + N_B + 1) M / eps``
    and ``n_opt_int`` its floor. ``m_star`` is ``eps / (2 xi)``, the mode
    count marked in the figure; ``m_unit`` is where ``n_opt_real`` itself
    reaches 1 (``eps / (4 xi)``). ``brute_force`` is the integer threshold
    minimizing :func:`photon_count_error` at ``M``.
    """

    epsilon: float
    n_opt_real: float
    n_opt_int: int
    m_star: float
    m_unit: float
    brute_force: int


@dataclass
class ErrorCurve:
    m_grid: np.ndarray
    p_cd: np.ndarray
    p_ng: np.ndarray
    p_ci: np.ndarray
    p_count: np.ndarray
    count_threshold: np.ndarray
    r_ci: np.ndarray
    r_cd: Optional[np.ndarray] = None
    ratio_db: Optional[np.ndarray] = None
    r_count: Optional[np.ndarray] = None
    ratio_count_db: Optional[np.ndarray] = None

    def __post_init__(self):
        m = np.asarray(self.m_grid, dtype=float)
        if np.any(np.diff(m) <= 0):
            raise ValueError("M grid must be strictly increasing")
        for name in ("p_cd", "p_ng", "p_ci", "p_count", "r_ci"):
            if len(getattr(self, name)) != len(m):
                raise ValueError(f"{name} has length {len(getattr(self, name))}, expected {len(m)}")


def log_grid(m_min: float, m_max: float, points_per_decade: int) -> np.ndarray:
    """Integer mode counts ``m_min * 10**(k / points_per_decade)`` up to ``m_max``.

    The lattice is anchored at ``m_min`` so decade points stay on the grid;
    ``m_max`` is appended when it falls between lattice points. Duplicates
    after rounding are removed.
    """
    if not 1 <= m_min < m_max:
        raise ValueError(f"need 1 <= m_min < m_max, got {m_min}, {m_max}")
    if points_per_decade < 1:
        raise ValueError("points_per_decade must be >= 1")
    span = math.log10(m_max / m_min) * points_per_decade
    k = np.arange(int(math.floor(span + 1e-9)) + 1)
    g = m_min * 10.0 ** (k / points_per_decade)
    g = np.append(g, m_max) if span - k[-1] > 1e-9 else g
    return np.unique(np.rint(g).astype(np.int64))


# ---------------------------------------------------------------- outer rule


def _gl_segment(a: float, b: float, n: int):
    t, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (b - a) * t + 0.5 * (b + a), 0.5 * (b - a) * w


def outer_rule(gp: GammaDensityParams, quad: QuadSettings = QuadSettings()):
    """Nodes and density-weighted weights for integrals against the gamma law.

    A single Gauss-Legendre panel covers the law when it sits well away from
    zero. Otherwise the bulk ``[hi/8, hi]`` gets four equal panels and the
    head ``[0, hi/8]`` log-spaced panels that resolve the behaviour at the origin.
    """
    mean, sd, s, k = gp.mean, gp.std, gp.scale, gp.shape
    hi = max(mean + quad.window_sigmas * sd, gammainccinv(k, 1e-18) * s)
    lo = min(mean - quad.window_sigmas * sd, gammaincinv(k, 1e-18) * s)
    if lo > 0:
        x, w = _gl_segment(lo, hi, quad.nodes)
    else:
        split = hi / 8.0
        head = [0.0] + [split * 10.0 ** (-j) for j in range(quad.head_segments - 1, -1, -1)]
        bulk = list(np.linspace(split, hi, 5))
        n_head = max(8, (quad.nodes // 2) // (len(head) - 1))
        n_bulk = max(16, (quad.nodes // 2) // 4)
        panels = [(a, b, n_head) for a, b in zip(head[:-1], head[1:])]
        panels += [(a, b, n_bulk) for a, b in zip(bulk[:-1], bulk[1:])]
        xs, ws = zip(*(_gl_segment(a, b, n) for a, b, n in panels))
        x, w = np.concatenate(xs), np.concatenate(ws)
    return x, w * gamma_pdf(x, gp)


def _gamma_law(p: ProtocolParams, xi: float) -> GammaDensityParams:
    return GammaDensityParams(p.m, 2.0 * xi)


def _idler_noise(p: ProtocolParams) -> float:
    e = conditional_params(p).e_therm
    if e < 0:
        raise ValueError(f"residual idler noise is negative ({e:.3e}); needs n_b >= 1 - kappa")
    return e


# ---------------------------------------------------------- conversion receiver


def _helstrom_vs_thermal(n_s: float, e: float, xs: np.ndarray, tol: float = HELSTROM_TOL) -> np.ndarray:
    xmax = float(np.max(xs)) if len(xs) else 0.0
    try:
        c = max(
            required_cutoff(StateSpec.thermal(n_s), tol),
            required_cutoff(StateSpec.displaced_thermal(math.sqrt(xmax), e), tol),
        )
    except TruncationError as exc:
        raise ConvergenceError(str(exc)) from exc
    c = 16 * math.ceil(c / 16)
    return np.array([helstrom_thermal_displaced(n_s, math.sqrt(x), e, c) for x in xs])


def p_cd(p: ProtocolParams, quad: QuadSettings = QuadSettings()) -> float:
    """Helstrom-limited error of the conversion receiver.

    Integral of the gamma law of ``x`` against
    ``P_H(thermal(N_S), displaced_thermal(sqrt(x), E))``.
    """
    if p.kappa == 0 or p.n_s == 0:
        # the return carries no information about the idler
        return 0.5
    c = conditional_params(p)
    e = _idler_noise(p)
    x, w = outer_rule(_gamma_law(p, c.xi), quad)
    ph = _helstrom_vs_thermal(p.n_s, e, x)
    return float(min(0.5, max(np.dot(w, ph), 0.0)))


def p_cd_dephased(p: ProtocolParams, quad: QuadSettings = QuadSettings()) -> float:
    """Same integral with the present-hypothesis idler dephased in the number basis.

    This is the random-phase-target performance: both states are then
    diagonal and the per-``x`` optimum is a photon-count likelihood test.
    """
    if p.kappa == 0 or p.n_s == 0:
        return 0.5
    c = conditional_params(p)
    e = _idler_noise(p)
    x, w = outer_rule(_gamma_law(p, c.xi), quad)
    n_max = max(
        required_cutoff(StateSpec.thermal(p.n_s), HELSTROM_TOL),
        required_cutoff(StateSpec.displaced_thermal(math.sqrt(float(x.max())), e), HELSTROM_TOL),
    )
    p0 = displaced_thermal_pmf(0.0, p.n_s, n_max)
    p1 = displaced_thermal_pmf(x, e, n_max)
    per_x = 0.5 * np.minimum(p0[None, :], p1).sum(axis=1)
    return float(min(0.5, np.dot(w, per_x)))


# --------------------------------------------------------------- bounds / CI


def ng_exponent(p: ProtocolParams) -> float:
    """``beta`` of the entanglement lower bound (infinite for a perfect, noiseless target)."""
    arg = p.kappa / (p.n_b * (1.0 - p.kappa) + 1.0)
    if arg >= 1.0:
        return math.inf
    return -math.log1p(-arg)


def p_ng(p: ProtocolParams, m: Optional[int] = None) -> float:
    """Lower bound ``exp(-beta M N_S) / 4`` on any entangled-probe error probability."""
    m = p.m if m is None else m
    if m < 0:
        raise ValueError("m must be >= 0")
    beta = ng_exponent(p)
    if math.isinf(beta):
        if m == 0 or p.n_s == 0:
            return 0.25
        warnings.warn("kappa = 1 with no background: the bound exponent is infinite", RuntimeWarning)
        return 0.0
    return 0.25 * math.exp(-beta * m * p.n_s)


def p_ci(p: ProtocolParams, m: Optional[int] = None, cutoff: Optional[int] = None) -> float:
    """Helstrom error of coherent probes aggregated into one mode against the same background.

    ``M`` coherent probes of ``N_S`` photons each return ``M kappa N_S``
    photons of coherent amplitude on top of thermal ``N_B``. The pair is
    shifted by half the displacement so both states sit symmetric about the
    origin (trace norm is unitarily invariant), which halves the cutoff.
    """
    m = p.m if m is None else m
    if m < 0:
        raise ValueError("m must be >= 0")
    amp2 = m * p.kappa * p.n_s
    if amp2 == 0:
        return 0.5
    half = 0.5 * math.sqrt(amp2)
    if p.n_b == 0:
        # pure coherent states: closed form avoids a needless large cutoff
        return 0.5 * (1.0 - math.sqrt(-math.expm1(-amp2)))
    s0 = StateSpec.displaced_thermal(-half, p.n_b)
    s1 = StateSpec.displaced_thermal(half, p.n_b)
    if cutoff is None:
        try:
            cutoff = required_cutoff(s1, CI_TOL)
        except TruncationError as exc:
            raise ConvergenceError(str(exc)) from exc
        cutoff = 32 * math.ceil(cutoff / 32)
    return helstrom(build_state(s0, cutoff, CI_TOL), build_state(s1, cutoff, CI_TOL))


# ----------------------------------------------------------- photon counting


def _count_tables(p: ProtocolParams, n_max: int, quad: QuadSettings):
    """H0 upper tails and H1 cumulative probabilities for thresholds 0..n_max."""
    c = conditional_params(p)
    e = _idler_noise(p)
    t = np.arange(n_max + 1)
    if p.n_s == 0:
        tail0 = np.zeros(n_max + 1)
    else:
        tail0 = np.exp((t + 1) * math.log(p.n_s / (p.n_s + 1.0)))
    x, w = outer_rule(_gamma_law(p, c.xi), quad)
    pmf1 = w @ displaced_thermal_pmf(x, e, n_max)
    return tail0, np.cumsum(pmf1)


def photon_count_errors(p: ProtocolParams, max_threshold: int, quad: QuadSettings = QuadSettings()) -> np.ndarray:
    """Error of "declare present iff count > t" for every t in 0..max_threshold."""
    if p.kappa == 0 or p.n_s == 0:
        # hypotheses coincide; every rule sits at the prior
        return np.full(max_threshold + 1, 0.5)
    tail0, cdf1 = _count_tables(p, max_threshold, quad)
    return 0.5 * tail0 + 0.5 * np.minimum(cdf1, 1.0)


def photon_count_error(p: ProtocolParams, threshold: int, quad: QuadSettings = QuadSettings()) -> float:
    """Error of "declare present iff count > threshold"; ties (count == threshold) go to absent."""
    if int(threshold) != threshold or threshold < 0:
        raise ValueError(f"threshold must be a nonnegative integer, got {threshold!r}")
    return float(photon_count_errors(p, int(threshold), quad)[-1])


def best_photon_count(p: ProtocolParams, quad: QuadSettings = QuadSettings(), max_threshold: Optional[int] = None):
    """Brute-force integer threshold search; returns ``(threshold, error)``."""
    if max_threshold is None:
        c = conditional_params(p)
        mean_x = 2.0 * c.xi * p.m
        max_threshold = int(mean_x + 10.0 * math.sqrt(mean_x + 1.0) + 10)
    errs = photon_count_errors(p, max_threshold, quad)
    t = int(np.argmin(errs))
    return t, float(errs[t])


def optimal_threshold(p: ProtocolParams, quad: QuadSettings = QuadSettings()) -> ThresholdPlan:
    if not 0 < p.n_s < math.exp(-1.0):
        raise ValueError("the threshold formula needs 0 < N_S < 1/e")
    c = conditional_params(p)
    eps = -lambert_w_minus1(-p.n_s / math.e)
    n_real = 2.0 * c.mu**2 * (p.kappa * p.n_s + p.n_b + 1.0) * p.m / eps
    m_star = eps / (2.0 * c.xi) if c.xi > 0 else math.inf
    m_unit = eps / (4.0 * c.xi) if c.xi > 0 else math.inf
    bf, _ = best_photon_count(p, quad)
    return ThresholdPlan(eps, n_real, int(math.floor(n_real)), m_star, m_unit, bf)


def threshold_transition(
    p: ProtocolParams, m_lo: int, m_hi: int, quad: QuadSettings = QuadSettings()
) -> int:
    """Smallest M in (m_lo, m_hi] where the best integer threshold leaves 0.

    Bisection in M; requires threshold 0 to be optimal at ``m_lo`` and not at ``m_hi``.
    """

    def best(m):
        return best_photon_count(p.with_m(m), quad)[0]

    if best(m_lo) != 0 or best(m_hi) == 0:
        raise ValueError(f"no 0 -> 1 threshold transition bracketed by [{m_lo}, {m_hi}]")
    lo, hi = int(m_lo), int(m_hi)
    while hi - lo > 1:
        mid = int(math.sqrt(lo * hi))
        mid = min(max(mid, lo + 1), hi - 1)
        if best(mid) == 0:
            lo = mid
        else:
            hi = mid
    return hi


# ------------------------------------------------------------------ homodyne


def homodyne_threshold(n_s: float, e: float, x: float) -> float:
    """Optimal single threshold (declare present iff q > t) for one value of x.

    Under absence the quadrature is N(0, 2N_S+1); under presence it is
    N(2 sqrt(x), 2E+1). Candidates are the density crossings; the one with the
    smallest error wins. Returns ``inf`` when no threshold beats guessing.
    """
    a, b, mu = 2.0 * n_s + 1.0, 2.0 * e + 1.0, 2.0 * math.sqrt(x)
    if mu == 0 and a == b:
        return math.inf
    qa = 0.5 / b - 0.5 / a
    qb = -mu / b
    qc = 0.5 * mu * mu / b + 0.5 * math.log(b / a)
    if abs(qa) < 1e-15 * max(1.0 / a, 1.0 / b):
        roots = [-qc / qb] if qb != 0 else []
    else:
        disc = qb * qb - 4 * qa * qc
        roots = []
        if disc >= 0:
            q = -0.5 * (qb + math.copysign(math.sqrt(disc), qb))
            roots = [q / qa, qc / q] if q != 0 else [0.0]
    best_t, best_err = math.inf, 0.5
    for t in roots:
        err = _homodyne_err_at(t, a, b, mu)
        if err < best_err:
            best_t, best_err = t, err
    return best_t


def _homodyne_err_at(t: float, a: float, b: float, mu: float) -> float:
    if math.isinf(t):
        return 0.5
    false_alarm = 0.5 * erfc(t / math.sqrt(2 * a))
    miss = 0.5 * erfc((mu - t) / math.sqrt(2 * b))
    return 0.5 * false_alarm + 0.5 * miss


def homodyne_error_given_x(n_s: float, e: float, x: float) -> float:
    a, b, mu = 2.0 * n_s + 1.0, 2.0 * e + 1.0, 2.0 * math.sqrt(x)
    return _homodyne_err_at(homodyne_threshold(n_s, e, x), a, b, mu)


def homodyne_error(
    p: ProtocolParams,
    quad: QuadSettings = QuadSettings(),
    threshold: Optional[float] = None,
    absent_law: bool = False,
) -> float:
    """Error of the quadrature receiver, "declare present iff q > t".

    With ``threshold=None`` the threshold is re-optimized for every ``x``. By
    default both hypotheses are averaged over the presence law of ``x``.
    With ``absent_law=True`` the false-alarm term is averaged over the law
    that ``x`` actually follows when the target is absent (gamma with scale
    ``mu^2 (N_B + 1)``), which is what a simulation of the full record sees.
    """
    if p.kappa == 0 or p.n_s == 0:
        return 0.5
    c = conditional_params(p)
    e = _idler_noise(p)
    a, b = 2.0 * p.n_s + 1.0, 2.0 * e + 1.0

    def thr(x):
        return homodyne_threshold(p.n_s, e, x) if threshold is None else float(threshold)

    def miss_at(x):
        t = thr(x)
        if math.isinf(t):
            return 1.0 if t > 0 else 0.0
        return 0.5 * erfc((2.0 * math.sqrt(x) - t) / math.sqrt(2 * b))

    def fa_at(x):
        t = thr(x)
        if math.isinf(t):
            return 0.0 if t > 0 else 1.0
        return 0.5 * erfc(t / math.sqrt(2 * a))

    x1, w1 = outer_rule(_gamma_law(p, c.xi), quad)
    miss = float(np.dot(w1, [miss_at(x) for x in x1]))
    if absent_law:
        x0, w0 = outer_rule(GammaDensityParams(p.m, c.mu**2 * (p.n_b + 1.0)), quad)
    else:
        x0, w0 = x1, w1
    fa = float(np.dot(w0, [fa_at(x) for x in x0]))
    return 0.5 * fa + 0.5 * miss


# ------------------------------------------------------------------ exponents


def _secant_slopes(m: np.ndarray, logp: np.ndarray) -> np.ndarray:
    d = np.empty_like(logp)
    d[1:-1] = (logp[2:] - logp[:-2]) / (m[2:] - m[:-2])
    d[0] = (logp[1] - logp[0]) / (m[1] - m[0])
    d[-1] = (logp[-1] - logp[-2]) / (m[-1] - m[-2])
    return -d


def error_exponents(curve: ErrorCurve) -> ErrorCurve:
    """Fill ``r = -d ln P / dM`` and the dB ratio against the classical exponent.

    Neighbour secants in M (not in ln M): on a log grid they are exact for a
    pure exponential, which a difference quotient in ln M is not.
    """
    m = np.asarray(curve.m_grid, dtype=float)
    if len(m) < 3:
        raise ValueError("need at least 3 grid points to differentiate")
    r_cd = _secant_slopes(m, np.log(np.asarray(curve.p_cd, dtype=float)))
    r_count = _secant_slopes(m, np.log(np.asarray(curve.p_count, dtype=float)))
    r_ci = np.asarray(curve.r_ci, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = 10.0 * np.log10(r_cd / r_ci)
        ratio_count = 10.0 * np.log10(r_count / r_ci)
    return replace(curve, r_cd=r_cd, ratio_db=ratio, r_count=r_count, ratio_count_db=ratio_count)


def fit_exponent(m: Sequence[float], p: Sequence[float]) -> float:
    """Least-squares exponent ``-slope`` of ln P against M."""
    m = np.asarray(m, dtype=float)
    slope = np.polyfit(m, np.log(np.asarray(p, dtype=float)), 1)[0]
    return float(-slope)


def _grid_point(p: ProtocolParams, m: int, quad: QuadSettings, with_ci: bool, ci_cutoff: Optional[int] = None):
    pm = p.with_m(int(m))
    t, pc = best_photon_count(pm, quad)
    return (
        p_cd(pm, quad),
        p_ng(pm),
        p_ci(pm, cutoff=ci_cutoff) if with_ci else math.nan,
        pc,
        t,
    )


def compute_error_curve(
    p: ProtocolParams,
    m_grid: Sequence[int],
    quad: QuadSettings = QuadSettings(),
    workers: Optional[int] = None,
    with_ci: bool = True,
    progress=None,
    ci_cutoff: Optional[int] = None,
) -> ErrorCurve:
    """Evaluate every receiver on a grid of mode counts and attach exponents.

    Grid points are independent; with ``workers > 1`` they run on a thread
    pool and are collected in grid order, so the result does not depend on
    scheduling.
    """
    m_grid = np.asarray(m_grid, dtype=np.int64)

    def run(m):
        row = _grid_point(p, m, quad, with_ci, ci_cutoff)
        if progress is not None:
            progress(int(m), row)
        return row

    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            rows = list(ex.map(run, m_grid))
    else:
        rows = [run(m) for m in m_grid]
    cols = list(zip(*rows)) if rows else [[]] * 5
    r_ci = p.kappa * p.n_s / (4.0 * p.n_b) if p.n_b > 0 else math.inf
    curve = ErrorCurve(
        m_grid=m_grid,
        p_cd=np.array(cols[0], dtype=float),
        p_ng=np.array(cols[1], dtype=float),
        p_ci=np.array(cols[2], dtype=float),
        p_count=np.array(cols[3], dtype=float),
        count_threshold=np.array(cols[4], dtype=np.int64),
        r_ci=np.full(len(m_grid), r_ci),
    )
    return error_exponents(curve) if len(m_grid) >= 3 else curve
