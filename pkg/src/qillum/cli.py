"""Batch front end: ``qillum <subcommand> [--config PATH] [--out PATH] ...``.

Configuration is plain ``key = value`` text with ``#`` comments. Values given
on the command line (``--seed``, ``--out``, ``--svg`` and any ``--set
key=value``) override the file. Exit status is 0 on success, 2 for a bad
configuration or unwritable output, 3 when a numerical ladder fails to
converge.
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import os
import sys
import tempfile
from dataclasses import dataclass, fields
from typing import Optional

import numpy as np

from . import analytic, mc, qpg, source
from .fock import TruncationError
from .protocol import ProtocolParams, conditional_params

__all__ = ["RunConfig", "ConfigError", "parse_config", "load_config", "main"]

EXIT_OK, EXIT_CONFIG, EXIT_NONCONVERGENCE = 0, 2, 3

_TWO_PI = 2.0 * math.pi


class ConfigError(ValueError):
    """Malformed configuration file or override."""


@dataclass(frozen=True)
class RunConfig:
    """Every tunable of every subcommand, with the published operating point as default."""

    # scenario
    n_s: float = 1e-3
    kappa: float = 0.01
    n_b: float = 20.0
    theta: float = 0.0
    m: int = 100_000
    # grid
    m_min: float = 1e3
    m_max: float = 5e7
    points_per_decade: int = 4
    # numerics
    cutoff_override: int = 0
    quad_nodes: int = 128
    workers: int = 1
    # monte carlo
    trials: int = 100_000
    seed: int = 0
    receiver: str = "photon_count"
    threshold: Optional[float] = None
    block_size: int = 4096
    fast_path: bool = True
    # quantum pulse gate (angular units)
    qpg_gamma: float = _TWO_PI * 1e4
    qpg_mode_spacing: float = _TWO_PI * 1e6
    qpg_eta: Optional[float] = None
    qpg_window: int = 100
    # source (angular units)
    src_bandwidth: float = _TWO_PI * 1e10
    src_mode_spacing: float = 1e6
    src_coupling: Optional[float] = None
    # outputs
    out: Optional[str] = None
    svg: Optional[str] = None

    def __post_init__(self):
        try:
            self.protocol()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if not 1 <= self.m_min < self.m_max:
            raise ConfigError(f"need 1 <= m_min < m_max, got {self.m_min}, {self.m_max}")
        if self.points_per_decade < 4:
            raise ConfigError(f"points_per_decade must be >= 4, got {self.points_per_decade}")
        if self.trials < 1:
            raise ConfigError(f"trials must be >= 1, got {self.trials}")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.cutoff_override < 0:
            raise ConfigError("cutoff_override must be >= 0 (0 selects automatically)")
        if self.receiver not in ("photon_count", "homodyne", "helstrom_oracle"):
            raise ConfigError(f"unknown receiver {self.receiver!r}")
        if self.qpg_window < 0:
            raise ConfigError("qpg_window must be >= 0")

    def protocol(self, m: Optional[int] = None) -> ProtocolParams:
        return ProtocolParams(self.n_s, self.kappa, self.n_b, self.m if m is None else int(m), self.theta)

    def quad(self) -> analytic.QuadSettings:
        return analytic.QuadSettings(nodes=self.quad_nodes)


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _convert(key: str, raw: str):
    if key not in _FIELD_TYPES:
        raise ConfigError(f"unknown key {key!r}")
    typ = _FIELD_TYPES[key]
    raw = raw.strip()
    if typ.startswith("Optional") and raw.lower() in ("", "none"):
        return None
    try:
        if "bool" in typ:
            low = raw.lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(raw)
            return low in ("true", "1", "yes")
        if "int" in typ:
            v = float(raw)
            if v != int(v):
                raise ValueError(raw)
            return int(v)
        if "float" in typ:
            return float(raw)
        return raw
    except ValueError:
        raise ConfigError(f"bad value for {key}: {raw!r}") from None


def parse_config(text: str) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        out[key] = _convert(key, val)
    return out


def load_config(path: Optional[str], overrides: dict) -> RunConfig:
    values = {}
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                values.update(parse_config(fh.read()))
        except OSError as exc:
            raise ConfigError(f"cannot read config {path!r}: {exc}") from None
    values.update({k: v for k, v in overrides.items()})
    try:
        return RunConfig(**values)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


# ------------------------------------------------------------------- output


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        # 0.0 also absorbs negative zero
        return "%.17g" % (float(v) + 0.0)
    return str(v)


def _write_atomic(path: str, data: bytes) -> None:
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".qillum-", suffix=".tmp")
    try:
        os.chmod(tmp, 0o644)
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path: str, header, rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    _write_atomic(path, buf.getvalue().encode())


def _emit(cfg: RunConfig, header, rows) -> None:
    if cfg.out is None:
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])
    else:
        write_csv(cfg.out, header, rows)


def _header(cmd: str, cfg: RunConfig, keys) -> None:
    print(f"# qillum {cmd}", file=sys.stderr)
    for k in keys:
        print(f"#   {k} = {_fmt(getattr(cfg, k))}", file=sys.stderr)


def write_svg(path: str, curve: analytic.ErrorCurve, m_star: float) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    matplotlib.rcParams["svg.hashsalt"] = "qillum"
    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    m = np.asarray(curve.m_grid, dtype=float)
    ax.loglog(m, curve.p_cd, label="C→D (Helstrom)")
    ax.loglog(m, curve.p_count, label="C→D (photon count)")
    ax.loglog(m, curve.p_ci, label="classical")
    ax.loglog(m, curve.p_ng, label="entanglement bound")
    ax.axvline(1e5, ls="--", color="0.4", lw=0.8, label="M = 1e5")
    if math.isfinite(m_star):
        ax.axvline(m_star, ls="--", color="0.7", lw=0.8, label=f"M* = {m_star:.3g}")
    ax.set_xlabel("number of copies M")
    ax.set_ylabel("error probability")
    ax.legend(fontsize=8)
    fig.tight_layout()
    buf = io.BytesIO()
    fig.savefig(buf, format="svg", metadata={"Date": None})
    plt.close(fig)
    _write_atomic(path, buf.getvalue())


# ---------------------------------------------------------------- commands

_SCENARIO = ("n_s", "kappa", "n_b", "theta")


def cmd_error_curves(cfg: RunConfig) -> analytic.ErrorCurve:
    _header("error-curves", cfg, _SCENARIO + ("m_min", "m_max", "points_per_decade", "quad_nodes", "cutoff_override", "workers"))
    grid = analytic.log_grid(cfg.m_min, cfg.m_max, cfg.points_per_decade)
    if len(grid) < 3:
        raise ConfigError("grid has fewer than 3 distinct points")

    def progress(m, row):
        print(f"  M={m:<12d} p_cd={row[0]:.6e} p_ci={row[2]:.6e} p_count={row[3]:.6e}", file=sys.stderr)

    curve = analytic.compute_error_curve(
        cfg.protocol(),
        grid,
        cfg.quad(),
        workers=cfg.workers,
        progress=progress,
        ci_cutoff=cfg.cutoff_override or None,
    )
    rows = zip(
        curve.m_grid, curve.p_cd, curve.p_ng, curve.p_ci, curve.p_count, curve.r_cd, curve.r_ci, curve.ratio_db
    )
    _emit(cfg, ["M", "p_cd", "p_ng", "p_ci", "p_count", "r_cd", "r_ci", "ratio_db"], rows)
    if cfg.svg is not None:
        xi = conditional_params(cfg.protocol()).xi
        eps = -_lambert_or_nan(cfg.n_s)
        write_svg(cfg.svg, curve, eps / (2.0 * xi) if xi > 0 else math.inf)
    return curve


def _lambert_or_nan(n_s: float) -> float:
    from .specfn import lambert_w_minus1

    if not 0 < n_s < math.exp(-1.0):
        return math.nan
    return lambert_w_minus1(-n_s / math.e)


def cmd_exponent_ratio(cfg: RunConfig) -> dict:
    """Local exponents at ``cfg.m`` from a three-point stencil ``M / 1.25, M, 1.25 M``."""
    _header("exponent-ratio", cfg, _SCENARIO + ("m", "quad_nodes"))
    p = cfg.protocol()
    grid = np.array([int(round(cfg.m / 1.25)), cfg.m, int(round(cfg.m * 1.25))])
    curve = analytic.compute_error_curve(p, grid, cfg.quad(), with_ci=False)
    c = conditional_params(p)
    r_ci = curve.r_ci[1]
    limit_db = 10.0 * math.log10(2.0 * c.xi / r_ci) if r_ci > 0 and c.xi > 0 else math.nan
    res = {
        "M": cfg.m,
        "r_cd": curve.r_cd[1],
        "r_ci": r_ci,
        "ratio_db": curve.ratio_db[1],
        "r_count": curve.r_count[1],
        "ratio_count_db": curve.ratio_count_db[1],
        "two_xi": 2.0 * c.xi,
        "limit_db": limit_db,
    }
    _emit(cfg, list(res), [list(res.values())])
    return res


def _qpg_spec(cfg: RunConfig) -> qpg.QpgSpec:
    duration = _TWO_PI / cfg.qpg_mode_spacing
    return qpg.QpgSpec(cfg.qpg_gamma, cfg.qpg_eta, duration)


def cmd_qpg_report(cfg: RunConfig) -> qpg.SelectivityReport:
    _header("qpg-report", cfg, ("qpg_gamma", "qpg_mode_spacing", "qpg_eta", "qpg_window"))
    spec = _qpg_spec(cfg)
    pts = qpg.transfer_window(spec, cfg.qpg_window)
    rows = [(t.n, abs(t.t_coeff) ** 2, abs(t.r_coeff) ** 2, math.atan2(t.t_coeff.imag, t.t_coeff.real)) for t in pts]
    _emit(cfg, ["n", "abs_t2", "abs_r2", "arg_t"], rows)
    rep = qpg.selectivity_report(spec, max(cfg.qpg_window, 1))
    print(
        f"# conversion_0 = {rep.conversion_0:.17g}  worst_crosstalk = {rep.worst_crosstalk:.17g}"
        f"  bound = {qpg.crosstalk_bound(spec):.17g}  matched = {rep.matched}",
        file=sys.stderr,
    )
    return rep


def cmd_source_report(cfg: RunConfig) -> dict:
    _header("source-report", cfg, ("n_s", "src_bandwidth", "src_mode_spacing", "src_coupling"))
    coupling = math.asinh(math.sqrt(cfg.n_s)) if cfg.src_coupling is None else cfg.src_coupling
    spec = source.SourceSpec(coupling=coupling, duration=_TWO_PI / cfg.src_mode_spacing, bandwidth=cfg.src_bandwidth)
    pair = source.bogoliubov(spec)
    l, m = source.mode_count(spec)
    res = {"G": pair.g_coeff, "g": abs(pair.g_small), "N_S": pair.n_s, "l": l, "M": m, "Omega": spec.bandwidth}
    _emit(cfg, list(res), [list(res.values())])
    return res


def cmd_montecarlo(cfg: RunConfig) -> mc.TrialResult:
    _header("montecarlo", cfg, _SCENARIO + ("m", "trials", "seed", "receiver", "threshold", "block_size", "fast_path", "workers"))
    if cfg.receiver == "photon_count":
        rcv = mc.Receiver.photon_count(int(cfg.threshold or 0))
    elif cfg.receiver == "homodyne":
        rcv = mc.Receiver.homodyne(cfg.threshold)
    else:
        rcv = mc.Receiver.helstrom_oracle()
    tc = mc.TrialConfig(cfg.protocol(), cfg.trials, cfg.seed, rcv, cfg.block_size, cfg.fast_path)
    res = mc.run_trials(tc, workers=cfg.workers, quad=cfg.quad())
    header = [
        "receiver", "trials", "errors", "empirical_error", "wilson_low", "wilson_high",
        "analytic_ref", "within_3sigma", "false_alarm_rate", "miss_rate",
    ]
    row = [
        res.receiver, res.trials, res.errors, res.empirical_error, res.wilson_low, res.wilson_high,
        res.analytic_ref, res.within(3.0), res.false_alarm_rate, res.miss_rate,
    ]
    _emit(cfg, header, [row])
    return res


COMMANDS = {
    "error-curves": cmd_error_curves,
    "exponent-ratio": cmd_exponent_ratio,
    "qpg-report": cmd_qpg_report,
    "source-report": cmd_source_report,
    "montecarlo": cmd_montecarlo,
}


def _parse_set(items) -> dict:
    out = {}
    for item in items or []:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        k, v = (s.strip() for s in item.split("=", 1))
        out[k] = _convert(k, v)
    return out


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qillum", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", metavar="PATH")
        sp.add_argument("--out", metavar="PATH", help="CSV destination (stdout if omitted)")
        sp.add_argument("--svg", metavar="PATH")
        sp.add_argument("--seed", type=int, metavar="N")
        sp.add_argument("--set", action="append", metavar="KEY=VALUE", help="override any config key")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        overrides = _parse_set(args.set)
        for k in ("out", "svg", "seed"):
            v = getattr(args, k)
            if v is not None:
                overrides[k] = v
        cfg = load_config(args.config, overrides)
        if cfg.seed < 0 or cfg.seed >= 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"qillum: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"qillum: cannot write output: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (analytic.ConvergenceError, TruncationError) as exc:
        print(f"qillum: numerical non-convergence: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    except ValueError as exc:
        print(f"qillum: invalid parameters: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
