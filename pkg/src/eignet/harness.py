"""Experiment runner: test functions of prescribed smoothness, rate sweeps and slope fits."""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
import csv
import io
import json
import math
import os
from pathlib import Path

import numpy as np

from .dataspace import DataSpace
from .errors import ConfigError, DataError, EignetError, ParameterError
from .filtered_ops import DEFAULT_FILTER, Multiplier, SpectralFunction, sigma, tau_norms
from .kernels import kernel_from_config, torus_positions, validate_kernel
from .synthesis import (
    RateSpec,
    build_nu,
    choose_level,
    family_of,
    hoeffding_bound,
    l2_error,
    m_required,
    max_level,
    predicted_rate,
    regime,
    sample_network,
    sup_error,
    t_n,
)

BAND_FRACTION = 1.25


class NumericalFailure(EignetError):
    """An acceptance or validation check failed (CLI exit code 2)."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


def thread_count():
    """Worker cap from ``EIGNET_THREADS`` (default 1)."""
    raw = os.environ.get("EIGNET_THREADS", "1")
    try:
        n = int(raw)
    except ValueError as exc:
        raise ConfigError(f"EIGNET_THREADS must be an integer, got {raw!r}") from exc
    return max(1, n)


# ---------------------------------------------------------------------------
# Test functions
# ---------------------------------------------------------------------------


def _band_supports(lam, levels, allowed):
    """Index sets ``S_0 = {lambda = 0}`` and, for ``j >= 1``, the lower part
    ``2^{j-1} <= lambda <= 1.25 * 2^{j-1}`` of each dyadic band (at least its
    smallest eigenvalue), restricted to ``allowed``."""
    sets = []
    for j in range(levels + 1):
        if j == 0:
            sel = (lam == 0) & allowed
        else:
            band = (lam >= 2.0 ** (j - 1)) & (lam < 2.0**j) & allowed
            sel = band & (lam <= BAND_FRACTION * 2.0 ** (j - 1))
            if band.any() and not sel.any():
                sel = band & (lam == lam[band].min())
        sets.append(np.flatnonzero(sel))
    return sets


def make_sobolev_function(space, gamma, seed=0, profile="random-phase", levels=5, c=1.0, allowed=None, filt=DEFAULT_FILTER):
    """Function with ``||tau_j f||_2 = c 2^{-j gamma}`` for ``j = 0..levels`` exactly.

    Level ``j`` puts equal-modulus coefficients on the lower part of the band
    ``[2^{j-1}, 2^j)``; since ``tau_j`` also sees the top of band ``j - 1``, the
    band masses come from a forward (triangular) solve.  ``allowed`` is an
    optional mask over the indices ``lambda < 2**levels`` (used to avoid degrees
    a kernel cannot reproduce).  Random signs (sphere) or conjugate-symmetric
    random phases (torus) come from ``seed``; ``profile="deterministic"`` uses
    all-positive coefficients.
    """
    if gamma <= 0:
        raise ParameterError("gamma must be positive")
    if profile not in ("random-phase", "deterministic"):
        raise ParameterError(f"unknown profile {profile!r}")
    bound = 2.0**levels
    enum = space.enumeration(bound)
    lam = enum.lambdas
    allowed = np.ones(lam.size, dtype=bool) if allowed is None else np.asarray(allowed, dtype=bool)
    sets = _band_supports(lam, levels, allowed)
    weights = [filt(lam)] + [filt(lam / 2.0**j) - filt(lam / 2.0 ** (j - 1)) for j in range(1, levels + 1)]
    amp2 = np.zeros(lam.size)  # |f_hat|^2
    for j, S in enumerate(sets):
        target = (c * 2.0 ** (-j * gamma)) ** 2
        leak = float(np.sum(weights[j] ** 2 * amp2))
        if S.size == 0:
            continue
        own = float(np.mean(weights[j][S] ** 2))
        A = (target - leak) / own
        if A <= 0:
            raise ParameterError(f"gamma={gamma} too large for exact band norms on this space (band {j})")
        amp2[S] = A / S.size
    rng = np.random.default_rng(seed)
    mod = np.sqrt(amp2)
    if space.is_torus:
        ph = rng.uniform(0, 2 * np.pi, lam.size) if profile == "random-phase" else np.zeros(lam.size)
        neg = torus_positions(space, -enum.indices, bound)
        # pair k with -k: keep the phase of the lexicographically first member
        first = np.arange(lam.size) <= neg
        ph = np.where(first, ph, -ph[neg])
        ph[np.arange(lam.size) == neg] = 0.0
        coeffs = mod * np.exp(1j * ph)
        # -k and k may have been solved with different masses if only one is allowed
        coeffs = np.where(allowed & allowed[neg], coeffs, 0.0)
    else:
        s = rng.choice([-1.0, 1.0], lam.size) if profile == "random-phase" else np.ones(lam.size)
        coeffs = mod * s
    f = SpectralFunction(space, coeffs, bound, real=True)
    f.meta.update({"gamma": gamma, "levels": levels, "c": c, "seed": seed, "profile": profile})
    return f


def band_norms(f, levels=None, filt=DEFAULT_FILTER):
    levels = f.meta.get("levels") if levels is None else levels
    return tau_norms(f.space, filt, f, range(levels + 1))


# ---------------------------------------------------------------------------
# Fitting
# ---------------------------------------------------------------------------


def fit_loglog_slope(points):
    """Least-squares line through ``(log x, log y)``: returns ``(slope, intercept, rms residual)``."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 3:
        raise DataError("need at least 3 (abscissa, value) pairs")
    if np.any(pts <= 0):
        raise DataError("log-log fit needs positive abscissae and values")
    lx, ly = np.log(pts[:, 0]), np.log(pts[:, 1])
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    return float(slope), float(intercept), float(np.sqrt(np.mean(resid**2)))


# ---------------------------------------------------------------------------
# Rate experiments
# ---------------------------------------------------------------------------


@dataclass
class ExperimentConfig:
    kernel: dict
    gamma: float
    M: list
    seeds: list = field(default_factory=lambda: list(range(8)))
    operators: list = field(default_factory=lambda: [{"type": "identity"}])
    p: object = 2
    beta: float | None = None
    levels: int | None = None
    function_seed: int = 1234
    profile: str = "random-phase"
    c1: object = "auto"
    c2: float = 1.0
    slope_tolerance: float = 0.2
    slope_slack: float = 0.0
    validate_max_lambda: float = 4.0
    level_step: float = 1.0
    report_operators: list = field(default_factory=list)
    name: str = "experiment"

    @classmethod
    def from_dict(cls, d):
        known = {f for f in cls.__dataclass_fields__}
        extra = set(d) - known - {"space", "output", "tolerance"}
        if extra:
            raise ConfigError(f"unknown experiment keys: {sorted(extra)}")
        if "kernel" not in d or "gamma" not in d or "M" not in d:
            raise ConfigError("experiment config needs 'kernel', 'gamma' and 'M'")
        kw = {k: v for k, v in d.items() if k in known}
        tol = d.get("tolerance", {})
        if "slope_rel" in tol:
            kw["slope_tolerance"] = float(tol["slope_rel"])
        if "slope_slack" in tol:
            kw["slope_slack"] = float(tol["slope_slack"])
        cfg = cls(**kw)
        cfg.check()
        return cfg

    def check(self):
        M = list(self.M)
        if len(M) < 3 or any(b <= a for a, b in zip(M, M[1:])):
            raise ConfigError("M list must be strictly increasing with at least 3 values")
        if M[-1] < 4 * M[0]:
            raise ConfigError("M list must span at least two octaves")
        if self.p not in (2, "inf", math.inf):
            raise ConfigError("p must be 2 or 'inf'")
        if not self.seeds:
            raise ConfigError("at least one seed is required")


@dataclass
class RateReport:
    name: str
    rows: list
    fits: dict
    regime: str
    levels_used: dict
    c1: float
    validation: dict
    passed: bool

    def csv_text(self):
        cols = ["M", "seed", "operator", "p", "error_total", "error_sigma", "error_sampling", "n", "tv", "regime"]
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
        w.writeheader()
        for r in self.rows:
            w.writerow({k: (f"{r[k]:.12e}" if isinstance(r[k], float) else r[k]) for k in cols})
        return buf.getvalue()

    def summary(self):
        return {
            "name": self.name,
            "regime": self.regime,
            "c1": self.c1,
            "levels_used": {str(k): v for k, v in self.levels_used.items()},
            "fits": self.fits,
            "passed": self.passed,
            "validation": self.validation,
            "note": "tolerances are engineering choices; predicted rates hold only up to constants",
        }

    def write(self, outdir):
        out = Path(outdir)
        out.mkdir(parents=True, exist_ok=True)
        (out / f"{self.name}.csv").write_text(self.csv_text())
        (out / f"{self.name}.json").write_text(json.dumps(self.summary(), indent=2, sort_keys=True))


def _spec_for(kernel, gamma, beta, ops):
    q = kernel.X.q
    if beta is None:
        beta = 0.0 if kernel.variant == "gtn" else float(kernel.beta)
        if not math.isfinite(beta):
            raise ConfigError("kernel has no declared type beta; give 'beta' in the experiment config")
    return RateSpec(gamma=gamma, q=q, beta=beta, a=[op.exponent for op in ops])


def run_rate_experiment(config, kernel=None):
    """Sweep ``M`` and seeds, measure errors and fit slopes against the predicted exponents."""
    if isinstance(config, dict):
        config = ExperimentConfig.from_dict(config)
    kernel = kernel or kernel_from_config(config.kernel)
    rep = validate_kernel(kernel, config.validate_max_lambda, test_points=16, max_indices=500)
    if not rep.passed:
        raise NumericalFailure(f"kernel validation failed (max residual {rep.max_residual:.3e})", rep)
    ops = [Multiplier.from_config(o) if isinstance(o, dict) else o for o in config.operators]
    # measured on the same networks but not part of the rate bookkeeping
    extra = [Multiplier.from_config(o) if isinstance(o, dict) else o for o in config.report_operators]
    spec = _spec_for(kernel, config.gamma, config.beta, ops)
    spec.check()
    nmax = max_level(kernel)
    levels = config.levels if config.levels is not None else nmax + 1
    f = make_sobolev_function(
        kernel.X, config.gamma, config.function_seed, config.profile, levels, allowed=_allowed(kernel, levels)
    )
    # calibrate c1 so that the largest M reaches the finest supported level
    if config.c1 == "auto":
        _, consts = choose_level(spec, kernel, 1, ops, 1.0, config.c2, nmax, config.level_step)
        c1 = max(config.M) / consts[nmax]["M_required"]
    else:
        c1 = float(config.c1)
    level_of = {}
    for M in config.M:
        level_of[M], _ = choose_level(spec, kernel, M, ops, c1, config.c2, nmax, config.level_step)
    measures, sig_err = {}, {}
    for n in sorted(set(level_of.values())):
        P = sigma(kernel.X, DEFAULT_FILTER, 2.0**n, f)
        measures[n] = build_nu(P, kernel)
        sig_err[n] = {op.name: _op_norm(op, f, P, config.p, kernel) for op in ops + extra}
    grid = kernel.X.sup_grid(2 * kernel.bound) if config.p != 2 else None
    reg = regime(spec.gamma, spec.beta, spec.q)

    def one(job):
        M, seed = job
        n = level_of[M]
        nu = measures[n]
        net = sample_network(nu, M, seed)
        rows = []
        for op in ops + extra:
            err = l2_error(f, net, op) if config.p == 2 else sup_error(f, net, grid, op)
            rows.append(
                {
                    "M": M,
                    "seed": seed,
                    "operator": op.name,
                    "p": "2" if config.p == 2 else "inf",
                    "error_total": float(err),
                    "error_sigma": float(sig_err[n][op.name]),
                    "error_sampling": float(_sampling_error(net, nu, f, op, n, config.p, grid)),
                    "n": n,
                    "tv": float(nu.tv),
                    "regime": reg,
                }
            )
        return rows

    jobs = [(M, s) for M in config.M for s in config.seeds]
    with ThreadPoolExecutor(max_workers=thread_count()) as ex:
        rows = [r for chunk in ex.map(one, jobs) for r in chunk]
    rows.sort(key=lambda r: (r["operator"], r["M"], r["seed"]))
    fam = family_of(kernel)
    fits, ok = {}, True
    for op in ops:
        rate = predicted_rate(spec, op.exponent, fam, getattr(kernel, "r", None))
        med, lo, hi = [], [], []
        for M in config.M:
            e = [r["error_total"] for r in rows if r["operator"] == op.name and r["M"] == M]
            med.append(float(np.median(e)))
            lo.append(float(np.min(e)))
            hi.append(float(np.max(e)))
        x = rate.abscissa(config.M)
        slope, icpt, res = fit_loglog_slope(list(zip(x, med)))
        measured = -slope
        target = rate.exponent
        lo_ok = (1 - config.slope_tolerance) * target - config.slope_slack
        hi_ok = (1 + config.slope_tolerance) * target + config.slope_slack
        passed = lo_ok <= measured <= hi_ok
        ok &= passed
        fits[op.name] = {
            "measured_exponent": measured,
            "predicted_exponent": target,
            "abscissa": f"M/(log M)^{rate.log_power:g}",
            "intercept": icpt,
            "residual": res,
            "median_errors": med,
            "min_errors": lo,
            "max_errors": hi,
            "accept_range": [lo_ok, hi_ok],
            "passed": bool(passed),
        }
    return RateReport(config.name, rows, fits, reg, level_of, c1, rep.summary(), bool(ok))


def _allowed(kernel, levels):
    enum = kernel.X.enumeration(2.0**levels)
    if kernel.variant != "relu":
        return None
    from .kernels import relu_covered_degrees

    cov = set(relu_covered_degrees(kernel.r, int(enum.degrees.max())).tolist())
    return np.array([d in cov for d in enum.degrees])


def _op_norm(op, f, P, p, kernel):
    from .synthesis import _apply

    d = _apply(op, f) - _apply(op, P)
    if p == 2:
        return d.norm2()
    return float(np.max(np.abs(d.evaluate(kernel.X.sup_grid(2 * kernel.bound)))))


def _sampling_error(net, nu, f, op, n, p, grid):
    from .synthesis import _apply

    P = sigma(f.space, DEFAULT_FILTER, 2.0**n, f)
    if p == 2:
        return l2_error(P, net, op)
    return float(np.max(np.abs(_apply(op, P).evaluate(grid) - net.evaluate(grid, op))))


# ---------------------------------------------------------------------------
# Total variation across levels and the concentration check
# ---------------------------------------------------------------------------


def streamed_tv(P, kernel, chunk=1024):
    """``|nu_G(P)|_TV`` accumulated over blocks of Y nodes (never materializes all masses)."""
    active = P.active_bound()
    if active >= kernel.bound:
        raise ParameterError("polynomial is not below the kernel bound")
    coeffs = P.project(kernel.bound).coeffs
    nz = np.flatnonzero(np.abs(coeffs) > 0)
    if nz.size == 0:
        return 0.0
    y, w = kernel.y_quadrature(active + 1.0)
    total = 0.0
    for s in range(0, len(y), chunk):
        D = kernel.connection(nz, y[s : s + chunk])
        total += float(np.sum(np.abs(coeffs[nz][:, None] * D) @ w[s : s + chunk]))
    return total


def tv_by_level(f, kernel, levels):
    return {int(n): streamed_tv(sigma(f.space, DEFAULT_FILTER, 2.0**n, f), kernel) for n in levels}


@dataclass
class ConcentrationResult:
    t: np.ndarray
    empirical: np.ndarray
    envelope: np.ndarray
    net_size: int
    width: float
    M: int
    trials: int

    @property
    def passed(self):
        return bool(np.all(self.empirical <= self.envelope))


def concentration_check(nu, M, points, trials=1000, seed0=0, num_t=25):
    """Tail of ``sup_x |network(x) - E network(x)|`` over ``points`` versus the union Hoeffding bound.

    Each draw contributes ``tv * w_j * G(ell_j; x, y_j)``, a variable with range
    ``2 tv sup|G|``; the envelope is ``len(points) * hoeffding_bound(M, t, width)``.
    """
    kernel = nu.kernel
    if not kernel.ell_independent:
        raise ParameterError("the concentration check precomputes G for ell-independent kernels")
    G = np.real_if_close(kernel.evaluate(0, points, nu.y))
    mean = G @ nu.masses.sum(axis=0)
    gsup = float(np.max(np.abs(G)))
    width = 2.0 * nu.tv * gsup
    absm = np.abs(nu.masses).ravel()
    cdf = np.cumsum(absm)
    ny = nu.masses.shape[1]
    devs = np.empty(trials)
    for i in range(trials):
        rng = np.random.default_rng(seed0 + i)
        flat = np.minimum(np.searchsorted(cdf, rng.random(M) * cdf[-1], side="right"), absm.size - 1)
        m = nu.masses.ravel()[flat]
        vals = G[:, flat % ny] @ (m / np.abs(m)) * (nu.tv / M)
        devs[i] = np.max(np.abs(vals - mean))
    # extend the grid until the union bound itself drops to 1e-3
    t_env = width * math.sqrt(math.log(2.0 * len(points) / 1e-3) / (2.0 * M))
    t = np.geomspace(max(devs.min(), 1e-12), max(devs.max() * 1.5, t_env, 1e-12), num_t)
    emp = np.array([np.mean(devs >= tt) for tt in t])
    env = np.array([min(1.0, len(points) * hoeffding_bound(M, tt, width)) for tt in t])
    return ConcentrationResult(t, emp, env, len(points), width, M, trials)


def experiment_from_file(path):
    try:
        cfg = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return cfg
