"""Command-line front end.

    mimomgf <command> [--config PATH] [--seed N] [--out PATH] [--tol X] [--mc-n N] [--bits]

Commands: mgf, ergodic, outage, density, simulate, ustm, validate, sweep.
Results are CSV (a ``#`` line with the config hash and seed, then a header
row); ``validate`` prints one JSON object per check.  Exit status is 0 on
success, 2 for configuration errors and 3 when a numerical procedure did
not converge.

Configuration files are INI style::

    [channel]
    variant = fullcorr          ; iid | semicorr | rician | fullcorr
    nt = 4
    nr = 3
    d_lambda = 0.5              ; correlation model, used when T/R are not given
    delta = 10
    T = t.mat                   ; optional matrix files, relative to the config
    R = r.mat
    G0 = g0.mat
    side = transmit             ; semicorr only
    snr = 1.0

    [numeric]
    tol = 1e-10
    mc_n = 100000
    seed = 1

Matrix files hold "rows cols" on the first line and then the entries in
row-major order as "re im" pairs.
"""

from __future__ import annotations

import argparse
import configparser
import hashlib
import io
import json
import math
import os
import sys
import time
from dataclasses import dataclass

import numpy as np

from . import eigdens, groupcheck, mcsim, mgfcap, ustm
from .channels import (ArrayGeometry, FullyCorrelated, Iid, NonzeroMean, SemiCorrelated,
                       correlation_matrix)
from .mgfcap import NonConvergenceError
from .specfun import QuadratureSettings

__all__ = ["main", "ConfigError", "read_matrix", "write_matrix", "RunConfig", "load_config"]

EXIT_OK, EXIT_CONFIG, EXIT_NONCONVERGENCE = 0, 2, 3
LN2 = math.log(2.0)


class ConfigError(ValueError):
    pass


# --------------------------------------------------------------------------
# matrix files
# --------------------------------------------------------------------------

def write_matrix(path_or_file, a) -> None:
    """Write a complex matrix; repr() keeps every double bit-exact."""
    a = np.atleast_2d(np.asarray(a, dtype=complex))
    lines = [f"{a.shape[0]} {a.shape[1]}"]
    for row in a:
        lines.append(" ".join(f"{repr(float(v.real))} {repr(float(v.imag))}" for v in row))
    text = "\n".join(lines) + "\n"
    if hasattr(path_or_file, "write"):
        path_or_file.write(text)
    else:
        with open(path_or_file, "w") as fh:
            fh.write(text)


def read_matrix(path) -> np.ndarray:
    try:
        with open(path) as fh:
            tokens = fh.read().split()
    except OSError as exc:
        raise ConfigError(f"cannot read matrix file {path}: {exc.strerror}") from exc
    try:
        rows, cols = int(tokens[0]), int(tokens[1])
        vals = [float(t) for t in tokens[2:]]
    except (IndexError, ValueError) as exc:
        raise ConfigError(f"malformed matrix file {path}") from exc
    if rows < 1 or cols < 1 or len(vals) != 2 * rows * cols:
        raise ConfigError(f"matrix file {path}: expected {2 * rows * cols} numbers after the "
                          f"shape line, found {len(vals)}")
    v = np.array(vals)
    return (v[0::2] + 1j * v[1::2]).reshape(rows, cols)


# --------------------------------------------------------------------------
# configuration
# --------------------------------------------------------------------------

@dataclass
class RunConfig:
    parser: configparser.ConfigParser
    base_dir: str
    seed: int
    tol: float
    mc_n: int
    bits: bool
    out: str | None
    workers: int = 1

    def get(self, section, key, fallback=None):
        return self.parser.get(section, key, fallback=fallback)

    def getfloat(self, section, key, fallback=None):
        try:
            return self.parser.getfloat(section, key, fallback=fallback)
        except ValueError as exc:
            raise ConfigError(f"[{section}] {key}: not a number") from exc

    def getint(self, section, key, fallback=None):
        try:
            return self.parser.getint(section, key, fallback=fallback)
        except ValueError as exc:
            raise ConfigError(f"[{section}] {key}: not an integer") from exc

    def path(self, section, key):
        v = self.get(section, key)
        if v is None:
            return None
        return v if os.path.isabs(v) else os.path.join(self.base_dir, v)

    @property
    def settings(self) -> QuadratureSettings:
        return QuadratureSettings(abs_tol=min(self.tol, 1e-12), rel_tol=self.tol)

    def digest(self) -> str:
        buf = io.StringIO()
        for sec in sorted(self.parser.sections()):
            for k, v in sorted(self.parser.items(sec)):
                buf.write(f"{sec}.{k}={v}\n")
        buf.write(f"seed={self.seed}\ntol={self.tol!r}\nmc_n={self.mc_n}\nbits={self.bits}\n")
        return hashlib.sha256(buf.getvalue().encode()).hexdigest()[:16]


def load_config(args) -> RunConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    base = os.getcwd()
    if args.config:
        if not os.path.exists(args.config):
            raise ConfigError(f"config file {args.config} does not exist")
        try:
            cp.read(args.config)
        except configparser.Error as exc:
            raise ConfigError(f"cannot parse {args.config}: {exc}") from exc
        base = os.path.dirname(os.path.abspath(args.config))
    if not cp.has_section("channel"):
        cp.add_section("channel")
    for key in ("variant", "nt", "nr", "d_lambda", "delta", "side", "snr"):
        v = getattr(args, key, None)
        if v is not None:
            cp.set("channel", key, str(v))
    for key in ("T", "R", "G0"):
        v = getattr(args, key, None)
        if v is not None:
            cp.set("channel", key, os.path.abspath(v))

    def pick(flag, key, conv, default):
        if flag is not None:
            return flag
        try:
            return conv(cp.get("numeric", key)) if cp.has_option("numeric", key) else default
        except ValueError as exc:
            raise ConfigError(f"[numeric] {key}: bad value") from exc

    seed = pick(args.seed, "seed", int, 1)
    tol = pick(args.tol, "tol", float, 1e-10)
    mc_n = pick(args.mc_n, "mc_n", int, 0)
    if not tol > 0:
        raise ConfigError("--tol must be positive")
    if mc_n and mc_n < 100:
        raise ConfigError("--mc-n must be 0 or at least 100")
    if seed < 0 or seed >= 2 ** 64:
        raise ConfigError("--seed must be an unsigned 64-bit integer")
    out = args.out
    if out is None and cp.has_option("output", "out"):
        out = cp.get("output", "out")
        out = out if os.path.isabs(out) else os.path.join(base, out)
    return RunConfig(cp, base, seed, tol, mc_n, bool(args.bits), out, getattr(args, "workers", 1) or 1)


def _truthy(v):
    return str(v).strip().lower() in ("1", "yes", "true", "on")


def build_spec(cfg: RunConfig, **override):
    """Channel spec from the [channel] section (``override`` replaces keys)."""
    def val(key, fallback=None):
        if key in override:
            return override[key]
        return cfg.get("channel", key, fallback)

    variant = val("variant")
    if variant is None:
        raise ConfigError("no channel variant given ([channel] variant or --variant)")
    try:
        nt = int(val("nt")) if val("nt") is not None else None
        nr = int(val("nr")) if val("nr") is not None else None
        snr = float(val("snr", 1.0))
    except ValueError as exc:
        raise ConfigError("nt, nr and snr must be numbers") from exc
    if not snr > 0:
        raise ConfigError("snr must be positive")

    def corr(key, n, flag):
        p = override.get(key) if key in override else cfg.path("channel", key)
        if isinstance(p, np.ndarray):
            return p
        if p is not None:
            return read_matrix(p)
        if n is None:
            raise ConfigError(f"{key} needs a matrix file or an antenna count")
        if not _truthy(val(flag, "yes")):
            return np.eye(n)
        try:
            d, delta = float(val("d_lambda")), float(val("delta"))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{key}: give a matrix file or d_lambda and delta") from exc
        return correlation_matrix(ArrayGeometry(n, d, delta))

    try:
        if variant == "iid":
            if nt is None or nr is None:
                raise ConfigError("iid needs nt and nr")
            return Iid(nt, nr) if snr == 1.0 else SemiCorrelated(snr * np.eye(nt), nr)
        if variant == "semicorr":
            side = val("side", "transmit")
            if side == "transmit":
                T = corr("T", nt, "correlate_tx")
                return SemiCorrelated(snr * T, nr if nr is not None else T.shape[0], "transmit")
            T = corr("T", nr, "correlate_rx")
            return SemiCorrelated(snr * T, nt if nt is not None else T.shape[0], "receive")
        if variant == "fullcorr":
            return FullyCorrelated(snr * corr("T", nt, "correlate_tx"), corr("R", nr, "correlate_rx"))
        if variant == "rician":
            if snr != 1.0:
                raise ConfigError("snr scaling is not defined for the rician variant")
            p = override.get("G0") if "G0" in override else cfg.path("channel", "G0")
            if p is None:
                raise ConfigError("rician needs a G0 matrix file")
            return NonzeroMean(p if isinstance(p, np.ndarray) else read_matrix(p))
    except ConfigError:
        raise
    except (ValueError, ArithmeticError) as exc:
        raise ConfigError(str(exc)) from exc
    raise ConfigError(f"unknown variant {variant!r}")


def parse_grid(text: str) -> np.ndarray:
    """``start:stop:num`` (inclusive, evenly spaced) or a comma list."""
    text = text.strip()
    try:
        if ":" in text:
            a, b, n = text.split(":")
            return np.linspace(float(a), float(b), int(n))
        return np.array([float(v) for v in text.split(",") if v.strip()])
    except ValueError as exc:
        raise ConfigError(f"bad grid {text!r}") from exc


# --------------------------------------------------------------------------
# output
# --------------------------------------------------------------------------

def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def emit_csv(cfg: RunConfig, header, rows) -> None:
    lines = [f"# config_hash={cfg.digest()} seed={cfg.seed}", ",".join(header)]
    lines += [",".join(_fmt(v) for v in r) for r in rows]
    text = "\n".join(lines) + "\n"
    if cfg.out:
        with open(cfg.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _unit(cfg):
    return (1.0 / LN2) if cfg.bits else 1.0


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------

def cmd_mgf(args, cfg):
    spec = build_spec(cfg)
    zs = [complex(z.strip()) for z in (args.z or cfg.get("mgf", "z", "0")).split(",") if z.strip()]
    ev = mgfcap.evaluator(spec)
    vals, ls = ev.values(np.array(zs), cfg.settings)
    rows = [(z.real, z.imag, v.real, v.imag, l, ev.method) for z, v, l in zip(zs, vals, ls)]
    emit_csv(cfg, ["z_re", "z_im", "g_re", "g_im", "log_scale", "method"], rows)
    return EXIT_OK


def cmd_ergodic(args, cfg):
    spec = build_spec(cfg)
    u = _unit(cfg)
    e = mgfcap.ergodic_capacity(spec, cfg.settings)
    header, row = ["ergodic"], [e * u]
    if args.variance:
        header.append("variance")
        row.append(mgfcap.capacity_variance(spec, cfg.settings) * u * u)
    if cfg.mc_n:
        est = mcsim.estimate(spec, mcsim.MEAN_I, cfg.mc_n, cfg.seed, cfg.workers)
        header += ["mc_mean", "mc_stderr"]
        row += [est.mean * u, est.stderr * u]
    emit_csv(cfg, header, [row])
    return EXIT_OK


def cmd_outage(args, cfg):
    spec = build_spec(cfg)
    grid = parse_grid(args.grid or cfg.get("outage", "grid", "0:10:41"))
    if np.any(grid < 0):
        raise ConfigError("outage thresholds must be nonnegative")
    scale = LN2 if cfg.bits else 1.0
    res = mgfcap.outage_curve(spec, grid * scale, cfg.settings)
    header = ["i_out", "exceedance", "cdf", "error", "converged"]
    rows = [[x, r.exceedance, r.cdf, r.error, r.converged] for x, r in zip(grid, res)]
    if cfg.mc_n:
        emp = mcsim.empirical_survival(spec, np.maximum(grid * scale, 0.0), cfg.mc_n, cfg.seed, cfg.workers) \
            if np.all(np.diff(grid) > 0) else None
        if emp is None:
            raise ConfigError("MC survival needs an increasing grid")
        header += ["mc_exceedance", "mc_stderr"]
        for r, e in zip(rows, emp):
            r += [e.mean, e.stderr]
    emit_csv(cfg, header, rows)
    return EXIT_OK if all(r.converged for r in res) else EXIT_NONCONVERGENCE


def cmd_density(args, cfg):
    spec = build_spec(cfg)
    try:
        dens = eigdens.joint_density(spec)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    g = parse_grid(args.grid or cfg.get("density", "grid", "0.1:10:50"))
    if np.any(g <= 0):
        raise ConfigError("density grid must be positive")
    mesh = np.meshgrid(*([g] * dens.N), indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    vals = dens(pts)
    header = [f"lambda{i + 1}" for i in range(dens.N)] + ["density"]
    emit_csv(cfg, header, [list(p) + [v] for p, v in zip(pts, vals)])
    return EXIT_OK


def cmd_simulate(args, cfg):
    spec = build_spec(cfg)
    n = cfg.mc_n or 100_000
    u = _unit(cfg)
    rows = []
    for name, f, s in (("meanI", mcsim.MEAN_I, u), ("secondMomentI", mcsim.SECOND_MOMENT_I, u * u)):
        e = mcsim.estimate(spec, f, n, cfg.seed, cfg.workers)
        rows.append([name, e.mean * s, e.variance * s * s, e.stderr * s, e.n])
    emit_csv(cfg, ["functional", "mean", "variance", "stderr", "n"], rows)
    return EXIT_OK


def cmd_ustm(args, cfg):
    ypath = args.Y or cfg.path("ustm", "Y")
    if ypath is None:
        raise ConfigError("ustm needs a received block (--Y or [ustm] Y)")
    Y = read_matrix(ypath)
    T_coh = args.T_coh or cfg.getint("ustm", "T_coh", Y.shape[1])
    nr = Y.shape[0]
    tpath = cfg.path("channel", "T")
    try:
        if tpath is not None:
            T = read_matrix(tpath)
        else:
            nt = cfg.getint("channel", "nt")
            if nt is None:
                raise ConfigError("ustm needs nt or a T matrix file")
            d, delta = cfg.getfloat("channel", "d_lambda"), cfg.getfloat("channel", "delta")
            T = correlation_matrix(ArrayGeometry(nt, d, delta)) if d is not None and delta is not None \
                else np.eye(nt)
        snr = cfg.getfloat("channel", "snr", 1.0)
        c = ustm.UstmConfig(T_coh, T.shape[0], nr, snr * T)
        p = ustm.received_density(c, Y)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    header, row = ["p_Y"], [p]
    if cfg.mc_n:
        m, se = ustm.marginal_mc(c, Y, cfg.mc_n, cfg.seed)
        header += ["mc_p_Y", "mc_stderr"]
        row += [m, se]
    emit_csv(cfg, header, [row])
    return EXIT_OK


def cmd_sweep(args, cfg):
    var = args.var or cfg.get("sweep", "var", "d_lambda")
    if var not in ("d_lambda", "delta", "snr"):
        raise ConfigError("sweep variable must be d_lambda, delta or snr")
    xs = parse_grid(args.range or cfg.get("sweep", "range", "0.1:3:30"))
    if xs.size == 0 or np.any(xs <= 0):
        raise ConfigError("sweep range must be nonempty and positive")
    u = _unit(cfg)
    header = [var, "fullcorr", "semicorr"]
    if cfg.mc_n:
        header += ["fullcorr_mc", "fullcorr_mc_stderr", "semicorr_mc", "semicorr_mc_stderr"]
    rows = []
    for x in xs:
        ov = {var: x}
        row = [x]
        specs = [build_spec(cfg, variant="fullcorr", **ov),
                 build_spec(cfg, variant="semicorr", side="transmit", **ov)]
        for s in specs:
            row.append(mgfcap.ergodic_capacity(s, cfg.settings) * u)
        if cfg.mc_n:
            for s in specs:
                e = mcsim.estimate(s, mcsim.MEAN_I, cfg.mc_n, cfg.seed, cfg.workers)
                row += [e.mean * u, e.stderr * u]
        rows.append(row)
    emit_csv(cfg, header, rows)
    return EXIT_OK


# --------------------------------------------------------------------------
# validation suite
# --------------------------------------------------------------------------

def _check(name, residual, tol, **extra):
    return {"check": name, "passed": bool(residual <= tol), "residual": float(residual),
            "tolerance": float(tol), **extra}


def run_validation(tol: float = 1e-8, seed: int = 1, haar_n: int = 20_000):
    """Fast cross-module checks; returns a list of result dicts."""
    out = []
    bad = 0
    for M in range(1, 5):
        for r in groupcheck.representations(M, 6):
            bad += groupcheck.dimension(r) != groupcheck.dimension_vandermonde(r)
    out.append(_check("dimension formulas agree (m1<=6, M<=4)", bad, 0))
    r = groupcheck.Representation((2, 1, 0))
    out.append(_check("character at identity equals dimension",
                      abs(groupcheck.weyl_character(r, [1, 1, 1]) - 8), tol))
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    out.append(_check("character expansion of exp(x tr A)", groupcheck.expansion_residual(A, 0.1, 8), tol))
    out.append(_check("Cauchy-Binet, exponential weight",
                      groupcheck.cauchy_binet_residual([0.3, 0.7], [0.2, 0.9], "exp", 25), tol))
    out.append(_check("Cauchy-Binet, Bessel weight",
                      groupcheck.cauchy_binet_residual([0.3, 0.7], [0.2, 0.9], "bessel", 25), tol))
    h = groupcheck.haar_orthogonality_residual(groupcheck.Representation((1, 0)),
                                               groupcheck.Representation((1, 0)), haar_n, seed)
    out.append(_check("Haar orthogonality (z-score)", h.max_z, 4.0))

    T = np.array([[1.0, 0.4], [0.4, 1.0]])
    specs = [Iid(2, 3), SemiCorrelated(T, 3), SemiCorrelated(T, 1), FullyCorrelated(T, np.diag([1.0, 0.5, 2.0])),
             NonzeroMean(np.array([[1.0, 0.5], [0.2, 0.3], [0.0, 1.0]]))]
    worst = max(abs(mgfcap.mgf(s, 0).value - 1) for s in specs)
    out.append(_check("g(0) = 1 across variants", worst, tol))
    a = mgfcap.mgf_values(FullyCorrelated(T, np.eye(3) * (1 + 1e-9)), [0.3, 1.0 + 0.5j])
    b = mgfcap.mgf_values(SemiCorrelated(T, 3), [0.3, 1.0 + 0.5j])
    out.append(_check("confluence chain fullcorr(R=I) = semicorr", float(np.max(np.abs(a / b - 1))), 1e-6))
    for s in (Iid(2, 2), SemiCorrelated(T, 3), NonzeroMean(np.array([[1.0, 0.0], [0.5, 0.5]]))):
        d = eigdens.joint_density(s)
        out.append(_check(f"density normalization ({type(s).__name__})", abs(eigdens.normalization(d) - 1), 1e-5))
        pts = rng.exponential(2.0, size=(1000, d.N))
        out.append(_check(f"density nonnegative ({type(s).__name__})", max(0.0, -float(np.min(d(pts)))), 0.0))
    c = ustm.UstmConfig(3, 2, 2, np.array([[1.0, 0.3], [0.3, 2.0]]))
    Y = ustm.sample_received(c, seed)
    p1, p2 = ustm.received_density(c, Y, method="closed"), ustm.received_density(c, Y, method="hciz")
    out.append(_check("USTM closed form vs unitary integral", abs(p1 / p2 - 1), tol))
    return out


def cmd_validate(args, cfg):
    tol = args.tol if args.tol is not None else 1e-8
    results = run_validation(tol, cfg.seed)
    text = "".join(json.dumps(r) + "\n" for r in results)
    if cfg.out:
        with open(cfg.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK if all(r["passed"] for r in results) else 1


# --------------------------------------------------------------------------
# entry point
# --------------------------------------------------------------------------

COMMANDS = {
    "mgf": cmd_mgf,
    "ergodic": cmd_ergodic,
    "outage": cmd_outage,
    "density": cmd_density,
    "simulate": cmd_simulate,
    "ustm": cmd_ustm,
    "validate": cmd_validate,
    "sweep": cmd_sweep,
}


def build_parser() -> argparse.ArgumentParser:
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--config", help="INI configuration file")
    shared.add_argument("--seed", type=int, help="base seed (unsigned 64-bit)")
    shared.add_argument("--out", help="output path (default stdout)")
    shared.add_argument("--tol", type=float, help="relative quadrature / check tolerance")
    shared.add_argument("--mc-n", dest="mc_n", type=int, help="Monte Carlo sample count (0 = off)")
    shared.add_argument("--bits", action="store_true", help="report capacities in bits instead of nats")
    shared.add_argument("--workers", type=int, default=1, help="threads for Monte Carlo blocks")
    ch = shared.add_argument_group("channel (override the [channel] section)")
    ch.add_argument("--variant", choices=["iid", "semicorr", "rician", "fullcorr"])
    ch.add_argument("--nt", type=int)
    ch.add_argument("--nr", type=int)
    ch.add_argument("--d-lambda", dest="d_lambda", type=float)
    ch.add_argument("--delta", type=float)
    ch.add_argument("--side", choices=["transmit", "receive"])
    ch.add_argument("--snr", type=float)
    ch.add_argument("--T", dest="T", help="matrix file for T")
    ch.add_argument("--R", dest="R", help="matrix file for R")
    ch.add_argument("--G0", dest="G0", help="matrix file for the channel mean")

    p = argparse.ArgumentParser(prog="mimomgf", description=__doc__.split("\n")[0])
    sub = p.add_subparsers(dest="command", required=True)
    s = sub.add_parser("mgf", parents=[shared], help="g(z) at complex points")
    s.add_argument("--z", help="comma-separated complex values, e.g. 0,0.5+1j")
    s = sub.add_parser("ergodic", parents=[shared], help="ergodic capacity E[I]")
    s.add_argument("--variance", action="store_true", help="also report Var[I]")
    s = sub.add_parser("outage", parents=[shared], help="exceedance / CDF of I")
    s.add_argument("--grid", help="thresholds, start:stop:num or a comma list")
    s = sub.add_parser("density", parents=[shared], help="joint eigenvalue density on a grid")
    s.add_argument("--grid", help="per-coordinate lambda grid")
    sub.add_parser("simulate", parents=[shared], help="Monte Carlo moments of I")
    s = sub.add_parser("ustm", parents=[shared], help="received-signal density p(Y)")
    s.add_argument("--Y", dest="Y", help="matrix file with the nr x T_coh block")
    s.add_argument("--T-coh", dest="T_coh", type=int)
    sub.add_parser("validate", parents=[shared], help="run the validation checks")
    s = sub.add_parser("sweep", parents=[shared], help="ergodic capacity sweep (fullcorr vs semicorr)")
    s.add_argument("--var", choices=["d_lambda", "delta", "snr"])
    s.add_argument("--range", help="start:stop:num or a comma list")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args)
        return COMMANDS[args.command](args, cfg)
    except ConfigError as exc:
        print(f"mimomgf: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NonConvergenceError as exc:
        print(f"mimomgf: no convergence: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGENCE


if __name__ == "__main__":
    sys.exit(main())
