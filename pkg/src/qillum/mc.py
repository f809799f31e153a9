"""Monte Carlo simulation of the heterodyne-and-combine receiver chain.

Each trial draws the hypothesis with equal priors, samples the heterodyne
record of the M return modes, forms the combined idler and samples the
chosen receiver's measurement from its exact conditional law. Trials are
grouped into fixed-size blocks and every block owns an RNG stream derived
from ``(seed, block index)``, so results do not depend on how blocks are
scheduled across threads.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import analytic
from .fock import displaced_thermal_pmf
from .protocol import ProtocolParams, conditional_params, heterodyne_variance
from .specfn import GammaDensityParams

__all__ = [
    "Receiver",
    "TrialConfig",
    "HeterodyneRecord",
    "TrialResult",
    "sample_record",
    "sample_x",
    "wilson_interval",
    "run_trials",
]

PRESENT, ABSENT = "present", "absent"
_MAX_BLOCK_ENTRIES = 1 << 22


@dataclass(frozen=True)
class Receiver:
    """Decision stage applied to the combined idler.

    ``photon_count``: declare present iff the count exceeds ``threshold``.
    ``homodyne``: declare present iff the quadrature exceeds ``threshold``;
    ``threshold=None`` uses the optimal threshold for each record's ``x``.
    ``helstrom_oracle``: no physical sampling; each trial contributes the
    Helstrom error for its ``x``.
    """

    kind: str
    threshold: Optional[float] = None

    def __post_init__(self):
        if self.kind not in ("photon_count", "homodyne", "helstrom_oracle"):
            raise ValueError(f"unknown receiver {self.kind!r}")
        if self.kind == "photon_count" and (self.threshold is None or self.threshold < 0):
            raise ValueError("photon-count receiver needs a nonnegative integer threshold")

    @classmethod
    def photon_count(cls, threshold: int = 0) -> "Receiver":
        return cls("photon_count", int(threshold))

    @classmethod
    def homodyne(cls, threshold: Optional[float] = None) -> "Receiver":
        return cls("homodyne", threshold)

    @classmethod
    def helstrom_oracle(cls) -> "Receiver":
        return cls("helstrom_oracle")

    @property
    def label(self) -> str:
        if self.kind == "helstrom_oracle":
            return "helstrom_oracle(analytic per x)"
        if self.threshold is None:
            return f"{self.kind}(optimal)"
        return f"{self.kind}({self.threshold:g})"


@dataclass(frozen=True)
class TrialConfig:
    params: ProtocolParams
    trials: int
    seed: int = 0
    receiver: Receiver = Receiver.photon_count(0)
    block_size: int = 4096
    fast_path: bool = False

    def __post_init__(self):
        if int(self.trials) != self.trials or self.trials < 1:
            raise ValueError(f"trials must be a positive integer, got {self.trials!r}")
        if self.block_size < 1:
            raise ValueError("block_size must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    @property
    def effective_block(self) -> int:
        # full records cost M complex numbers per trial; cap memory per block
        if self.fast_path:
            return self.block_size
        return max(1, min(self.block_size, _MAX_BLOCK_ENTRIES // self.params.m))


@dataclass(frozen=True)
class HeterodyneRecord:
    alphas: np.ndarray
    norm: float
    x: float
    hypothesis: str


@dataclass(frozen=True)
class TrialResult:
    receiver: str
    trials: int
    errors: float
    empirical_error: float
    ci95: float
    wilson_low: float
    wilson_high: float
    false_alarm_rate: float
    miss_rate: float
    analytic_ref: float

    def within(self, z: float = 3.0) -> bool:
        """Whether the analytic reference lies inside the Wilson interval at ``z`` sigma."""
        lo, hi = wilson_interval(self.errors, self.trials, z)
        return lo <= self.analytic_ref <= hi


def wilson_interval(k: float, n: int, z: float = 1.959963984540054) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion ``k / n``."""
    if n <= 0:
        raise ValueError("n must be positive")
    phat = k / n
    z2 = z * z
    denom = 1.0 + z2 / n
    center = (phat + z2 / (2 * n)) / denom
    half = z * math.sqrt(max(phat * (1 - phat) / n + z2 / (4 * n * n), 0.0)) / denom
    return max(0.0, center - half), min(1.0, center + half)


def _return_variance(p: ProtocolParams, hypothesis: str) -> float:
    if hypothesis == PRESENT:
        return heterodyne_variance(p)
    return heterodyne_variance(p.with_kappa(0.0))


def sample_record(p: ProtocolParams, hypothesis: str, rng: np.random.Generator) -> HeterodyneRecord:
    """One heterodyne record of all M return modes."""
    if hypothesis not in (PRESENT, ABSENT):
        raise ValueError(f"hypothesis must be {PRESENT!r} or {ABSENT!r}")
    sd = math.sqrt(_return_variance(p, hypothesis))
    alphas = sd * (rng.standard_normal(p.m) + 1j * rng.standard_normal(p.m))
    norm = float(np.linalg.norm(alphas))
    mu = conditional_params(p).mu
    return HeterodyneRecord(alphas, norm, mu * mu * norm * norm, hypothesis)


def sample_x(p: ProtocolParams, hypothesis: str, rng: np.random.Generator, size: int) -> np.ndarray:
    """Draw ``x = mu^2 |alpha|^2`` directly from its gamma law, skipping the per-mode record."""
    mu = conditional_params(p).mu
    scale = 2.0 * mu * mu * _return_variance(p, hypothesis)
    if scale == 0:
        return np.zeros(size)
    gp = GammaDensityParams(p.m, scale)
    return rng.gamma(gp.shape, gp.scale, size=size)


def _block_x(p: ProtocolParams, present: np.ndarray, rng: np.random.Generator, fast: bool) -> np.ndarray:
    n = present.size
    mu2 = conditional_params(p).mu ** 2
    var = np.where(present, _return_variance(p, PRESENT), _return_variance(p, ABSENT))
    if fast:
        if mu2 == 0:
            return np.zeros(n)
        return rng.gamma(p.m, 2.0 * mu2 * var)
    sd = np.sqrt(var)[:, None]
    alphas = sd * (rng.standard_normal((n, p.m)) + 1j * rng.standard_normal((n, p.m)))
    return mu2 * np.einsum("ij,ij->i", alphas.real, alphas.real) + mu2 * np.einsum(
        "ij,ij->i", alphas.imag, alphas.imag
    )


def _sample_counts(pmf: np.ndarray, u: np.ndarray) -> np.ndarray:
    cdf = np.cumsum(pmf, axis=-1)
    if cdf.ndim == 1:
        return np.searchsorted(cdf, u, side="right")
    return (u[:, None] >= cdf).sum(axis=1)


def _count_nmax(xmax: float, e: float, n_s: float) -> int:
    mean = max(xmax, 0.0) + e + n_s
    return int(mean + 12.0 * math.sqrt(mean * (2 * max(e, n_s) + 1) + 1.0) + 20)


class _Block:
    __slots__ = ("errors", "fa", "miss", "n0", "n1")

    def __init__(self, errors, fa, miss, n0, n1):
        self.errors, self.fa, self.miss, self.n0, self.n1 = errors, fa, miss, n0, n1


def _run_block(cfg: TrialConfig, index: int, n: int, oracle) -> _Block:
    p = cfg.params
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(index,)))
    present = rng.random(n) < 0.5
    x = _block_x(p, present, rng, cfg.fast_path)
    c = conditional_params(p)
    e = max(c.e_therm, 0.0)
    rcv = cfg.receiver

    if rcv.kind == "helstrom_oracle":
        per = oracle(x)
        return _Block(float(per.sum()), math.nan, math.nan, int((~present).sum()), int(present.sum()))

    if rcv.kind == "photon_count":
        u = rng.random(n)
        counts = np.empty(n, dtype=np.int64)
        nmax = _count_nmax(float(x.max()) if n else 0.0, e, p.n_s)
        counts[~present] = _sample_counts(displaced_thermal_pmf(0.0, p.n_s, nmax), u[~present])
        if present.any():
            counts[present] = _sample_counts(displaced_thermal_pmf(x[present], e, nmax), u[present])
        declare = counts > rcv.threshold
    else:
        z = rng.standard_normal(n)
        q = np.where(present, 2.0 * np.sqrt(x) + math.sqrt(2 * e + 1) * z, math.sqrt(2 * p.n_s + 1) * z)
        if rcv.threshold is None:
            t = np.array([analytic.homodyne_threshold(p.n_s, e, xi) for xi in x])
        else:
            t = np.full(n, float(rcv.threshold))
        declare = q > t

    fa = int(np.count_nonzero(declare & ~present))
    miss = int(np.count_nonzero(~declare & present))
    return _Block(fa + miss, fa, miss, int((~present).sum()), int(present.sum()))


def _helstrom_oracle(p: ProtocolParams, quad: analytic.QuadSettings):
    c = conditional_params(p)
    e = max(c.e_therm, 0.0)

    def per_x(x: np.ndarray) -> np.ndarray:
        if p.kappa == 0 or p.n_s == 0:
            return np.full(x.size, 0.5)
        # Helstrom error is smooth in x; tabulate once per block and interpolate
        lo, hi = float(x.min()), float(x.max())
        grid = np.linspace(lo, hi, 257) if hi > lo else np.array([lo])
        vals = analytic._helstrom_vs_thermal(p.n_s, e, grid)
        return np.interp(x, grid, vals) if grid.size > 1 else np.full(x.size, vals[0])

    return per_x


def analytic_reference(cfg: TrialConfig, quad: analytic.QuadSettings = analytic.QuadSettings()) -> float:
    """Closed-form prediction for exactly what :func:`run_trials` simulates."""
    p, rcv = cfg.params, cfg.receiver
    if rcv.kind == "photon_count":
        return analytic.photon_count_error(p, int(rcv.threshold), quad)
    if rcv.kind == "homodyne":
        return analytic.homodyne_error(p, quad, threshold=rcv.threshold, absent_law=True)
    return analytic.p_cd(p, quad)


def run_trials(
    cfg: TrialConfig, workers: int = 1, quad: analytic.QuadSettings = analytic.QuadSettings()
) -> TrialResult:
    """Simulate ``cfg.trials`` detection attempts and compare with the analytic error."""
    bs = cfg.effective_block
    sizes = [min(bs, cfg.trials - i) for i in range(0, cfg.trials, bs)]
    oracle = _helstrom_oracle(cfg.params, quad) if cfg.receiver.kind == "helstrom_oracle" else None

    def job(i):
        return _run_block(cfg, i, sizes[i], oracle)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            blocks = list(ex.map(job, range(len(sizes))))
    else:
        blocks = [job(i) for i in range(len(sizes))]

    errors = 0.0
    fa = miss = n0 = n1 = 0
    for b in blocks:
        errors += b.errors
        n0 += b.n0
        n1 += b.n1
        if cfg.receiver.kind != "helstrom_oracle":
            fa += b.fa
            miss += b.miss
    n = cfg.trials
    lo, hi = wilson_interval(errors, n)
    if cfg.receiver.kind == "helstrom_oracle":
        fa_rate = miss_rate = math.nan
    else:
        fa_rate = fa / n0 if n0 else math.nan
        miss_rate = miss / n1 if n1 else math.nan
    return TrialResult(
        receiver=cfg.receiver.label,
        trials=n,
        errors=errors,
        empirical_error=errors / n,
        ci95=0.5 * (hi - lo),
        wilson_low=lo,
        wilson_high=hi,
        false_alarm_rate=fa_rate,
        miss_rate=miss_rate,
        analytic_ref=analytic_reference(cfg, quad),
    )
