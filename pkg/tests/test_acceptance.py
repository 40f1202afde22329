"""The ten acceptance criteria, each at its stated tolerance.

Every test prints (and records for the terminal summary) a single
``[PASS]`` or ``[FAIL]`` line before asserting.  Criteria that do not hold at
desk scale are left failing on purpose.
"""

import math
import time

import numpy as np
import pytest
from scipy.special import roots_jacobi

from conftest import ACCEPTANCE_LINES
from eignet.dataspace import DataSpace
from eignet.errors import InvalidKernelError
from eignet.filtered_ops import DEFAULT_FILTER, SpectralFunction, localization_slope, sigma
from eignet.harness import concentration_check, make_sobolev_function, run_rate_experiment, tv_by_level
from eignet.kernels import (
    GTNKernel,
    ReLUKernel,
    SVDKernel,
    TwistedZonalKernel,
    gtn_matrix,
    random_rotations,
    relu_expansion_coeff,
    rotation_matrix_elements,
    validate_kernel,
)
from eignet.synthesis import build_nu
from eignet.ultraspherical import UltrasphericalBasis

S2 = DataSpace.sphere(2)
T2 = DataSpace.torus(2)
M_GRID = [2**k for k in range(6, 14)]
SEEDS = list(range(8))


def verdict(number, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:2d}: {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert ok, line


def test_01_filtered_operator_reproduces_polynomials():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    worst = 0.0
    for space in (S2, T2):
        for _ in range(20):
            P = SpectralFunction.zeros(space, 16)
            n = P.coeffs.size
            P.coeffs = rng.standard_normal(n) + (1j * rng.standard_normal(n) if space.is_complex else 0)
            P.real = False
            # sphere: degree-64 quadrature grid; torus: FFT grid, 4 points per unit frequency
            worst = max(worst, (sigma(space, DEFAULT_FILTER, 32, P) - P).norm("inf"))
    dt = time.perf_counter() - t0
    verdict(1, worst < 1e-8 and dt < 10, f"sup |sigma_32 P - P| = {worst:.2e} over 40 polynomials ({dt:.1f}s)")


def test_02_kernel_localization():
    t0 = time.perf_counter()
    slopes = {N: localization_slope(2, DEFAULT_FILTER, N) for N in (32, 64)}
    dt = time.perf_counter() - t0
    ok = all(s <= -4 for s in slopes.values()) and dt < 30
    verdict(2, ok, "decay slopes " + ", ".join(f"N={N}: {s:.2f}" for N, s in slopes.items()) + " (need <= -4)")


def test_03_connection_identities():
    t0 = time.perf_counter()
    rng = np.random.default_rng(3)
    max_sphere = math.sqrt(8 * 9) + 1e-9  # degree 8 on S^2
    cases = {
        "svd": (SVDKernel(S2, 9, beta=1.0, mix_seed=1), max_sphere),
        "twisted": (
            TwistedZonalKernel(S2, 9, {"type": "power", "beta0": 1.0}, random_rotations(3, 3, rng)),
            max_sphere,
        ),
        "translation Q=4 q=2": (GTNKernel(4, 2, 9, {"type": "poisson", "rho": 0.5, "order": 3}), 8.0),
        "relu r=1": (ReLUKernel(S2, 9, 1), max_sphere),
        "relu r=2": (ReLUKernel(S2, 9, 2), max_sphere),
        "relu r=1.5": (ReLUKernel(S2, 9, 1.5), max_sphere),
    }
    res = {}
    for name, (k, top) in cases.items():
        rep = validate_kernel(k, top, tolerance=1e-6, test_points=32)
        res[name] = (rep.max_residual, int(rep.covered.sum()))
    dt = time.perf_counter() - t0
    ok = all(r < 1e-6 for r, _ in res.values()) and dt < 60
    detail = "; ".join(f"{n} {r:.1e} ({c} idx)" for n, (r, c) in res.items())
    verdict(3, ok, f"{detail} ({dt:.1f}s)")


def test_04_translation_reconstruction_and_rejection():
    rng = np.random.default_rng(4)
    Q, q = 4, 2
    k = GTNKernel(Q, q, 4, {"type": "coeffs", "terms": [[1, 1, 0.7, 0.2], [0, 0, 1.0, 0.0], [-1, 2, 0.3, -0.4], [2, 1, 0.1, 0.0]]})
    # uniform grid: exact for trigonometric polynomials of degree < 6
    g = np.arange(6) * 2 * np.pi / 6
    y = np.stack(np.meshgrid(g, g, indexing="ij"), -1).reshape(-1, 2)
    worst = 0.0
    for _ in range(100):
        kv = rng.integers(-6, 7, Q)
        x = rng.uniform(0, 2 * np.pi, Q)
        A = gtn_matrix(kv, q)
        integral = np.mean(k.profile_value(A @ x - y) * np.exp(1j * y.sum(axis=1))) / k.g_one
        worst = max(worst, abs(integral - np.exp(1j * kv @ x)))
    try:
        GTNKernel(Q, q, 4, {"type": "coeffs", "terms": [[0, 0, 1.0, 0.0], [1, 0, 0.5, 0.0]]})
        rejected = False
    except InvalidKernelError:
        rejected = True
    verdict(4, worst < 1e-8 and rejected, f"max reconstruction error {worst:.1e}; vanishing coefficient rejected: {rejected}")


def test_05_rotation_blocks_orthogonal():
    rng = np.random.default_rng(5)
    worst = 0.0
    for R in random_rotations(10, 3, rng):
        T = rotation_matrix_elements(S2, R, 6)
        worst = max(worst, float(np.max(np.abs(T.T @ T - np.eye(T.shape[0])))))
    verdict(5, worst < 1e-8, f"max |T^T T - I| = {worst:.1e} over 10 rotations, degrees <= 6")


def test_06_total_variation_regimes():
    kernel = SVDKernel(S2, 64, beta=0.0)
    levels = range(3, 7)
    out = {}
    for gamma in (0.5, 1.0, 2.0):
        f = make_sobolev_function(S2, gamma, seed=1, levels=7)
        out[gamma] = np.array(list(tv_by_level(f, kernel, levels).values()))
    ratios = out[0.5][1:] / out[0.5][:-1]
    first = bool(np.all(np.abs(ratios / math.sqrt(2.0) - 1) <= 0.2))
    steps = np.diff(out[1.0])
    n = np.array(list(levels), dtype=float)
    boundary = bool(np.all(steps > 0) and np.all(np.diff(steps) <= 0) and np.all(np.diff(out[1.0] / n) <= 0))
    third = bool(out[2.0].max() <= 1.05 * out[2.0].min())
    detail = (
        f"growth ratios {np.round(ratios, 3).tolist()} vs {math.sqrt(2):.3f}; "
        f"boundary increments {np.round(steps, 3).tolist()}; third-regime tv {np.round(out[2.0], 3).tolist()}"
    )
    verdict(6, first and boundary and third, detail)


def _profile_by_gauss_jacobi(q, r, j, nodes=60):
    # the |t|^r or max(t, 0)^r factor is absorbed into the Jacobi weight on [0, 1]
    a = q / 2 - 1
    basis = UltrasphericalBasis(q, j + 1)
    s, w = roots_jacobi(nodes, a, r)
    t = (1 + s) / 2
    weight = w * 2.0 ** (-(a + r + 1)) * (1 + t) ** a
    pj = basis.eval(j, t) / basis.eval(j, np.array([1.0]))[0]
    half = float(np.sum(weight * pj))
    if float(r).is_integer():
        return half
    return half * (1 + (-1) ** j)


def test_07_relu_expansion_coefficients():
    q = 2
    spread, match = {}, 0.0
    for r in (1, 2, 1.5):
        ell = np.arange(50, 201)
        b = np.array([abs(relu_expansion_coeff(q, r, int(e))) for e in ell])
        scaled = b * ell ** ((q + 2 * r + 1) / 2)
        spread[r] = float(scaled.max() / scaled.min() - 1)
        for e in range(6):
            j = 2 * e + r + 1 if float(r).is_integer() else 2 * e
            match = max(match, abs(relu_expansion_coeff(q, r, e) - _profile_by_gauss_jacobi(q, r, int(j))))
    ok = all(v <= 0.05 for v in spread.values()) and match < 1e-8
    detail = ", ".join(f"(2,{r:g}) spread {100 * v:.1f}%" for r, v in spread.items())
    verdict(7, ok, f"{detail}; small-index quadrature mismatch {match:.1e}")


def test_08_hoeffding_envelope():
    kernel = SVDKernel(S2, 8, beta=0.0)
    validate_kernel(kernel, 4.0, test_points=8)
    f = make_sobolev_function(S2, 1.0, seed=2, levels=3)
    nu = build_nu(sigma(S2, DEFAULT_FILTER, 4, f), kernel)
    net = S2.epsilon_net(1 / 16)
    res = concentration_check(nu, 200, net, trials=1000)
    live = res.envelope < 1
    worst = float(np.max(res.empirical[live] / res.envelope[live])) if live.any() else 0.0
    verdict(
        8,
        res.passed,
        f"{res.trials} draws of M={res.M} on a {res.net_size}-point net: largest deviation "
        f"{res.t[res.empirical > 0].max():.2f}, envelope below 1 only from t = {res.t[live].min():.1f} "
        f"(worst tail/envelope there {worst:.2f})",
    )


RATE_CASES = {
    "svd gamma=0.5": {"kernel": {"variant": "svd", "q": 2, "bound": 32, "beta": 0}, "gamma": 0.5},
    "svd gamma=1.5": {"kernel": {"variant": "svd", "q": 2, "bound": 32, "beta": 0}, "gamma": 1.5},
    "translation gamma=0.5": {
        "kernel": {"variant": "gtn", "Q": 2, "q": 1, "bound": 32, "profile": {"type": "poisson", "rho": 0.5, "order": 6}},
        "gamma": 0.5,
    },
    "translation gamma=1.5": {
        "kernel": {"variant": "gtn", "Q": 2, "q": 1, "bound": 32, "profile": {"type": "poisson", "rho": 0.5, "order": 6}},
        "gamma": 1.5,
    },
    "twisted gamma=1.5": {
        "kernel": {
            "variant": "twisted_zonal",
            "q": 2,
            "bound": 32,
            "profile": {"type": "power", "beta0": 1.0},
            "random_rotations": {"count": 3, "seed": 1},
        },
        "gamma": 1.5,
    },
    "relu r=1": {"kernel": {"variant": "relu", "q": 2, "bound": 16, "r": 1}, "gamma": 1.5},
    "relu r=2": {"kernel": {"variant": "relu", "q": 2, "bound": 16, "r": 2}, "gamma": 2.0},
    "relu r=1.5": {
        "kernel": {"variant": "relu", "q": 2, "bound": 16, "r": 1.5},
        "gamma": 2.0,
        "tolerance": {"slope_slack": 0.05},
    },
}


@pytest.fixture(scope="module")
def rate_reports():
    t0 = time.perf_counter()
    reports = {name: run_rate_experiment({**cfg, "M": M_GRID, "seeds": SEEDS, "name": name}) for name, cfg in RATE_CASES.items()}
    return reports, time.perf_counter() - t0


@pytest.mark.parametrize("name", list(RATE_CASES))
def test_09_rate_slopes(rate_reports, name):
    reports, dt = rate_reports
    fit = reports[name].fits["identity"]
    lo, hi = fit["accept_range"]
    verdict(
        9,
        fit["passed"] and dt < 600,
        f"{name}: slope {fit['measured_exponent']:.3f} vs {fit['predicted_exponent']:.3f} "
        f"on {fit['abscissa']} (accept [{lo:.3f}, {hi:.3f}], {reports[name].regime}; sweep {dt:.0f}s)",
    )


def test_10_derivative_mode():
    cfg = {
        "kernel": {"variant": "svd", "q": 2, "bound": 32, "beta": 0},
        "gamma": 1.5,
        "M": M_GRID,
        "seeds": SEEDS,
        "operators": [{"type": "power", "a": 0.5}],
        "report_operators": [{"type": "identity"}],
        "tolerance": {"slope_rel": 0.25},
    }
    rep = run_rate_experiment(cfg)
    by_run = {}
    for row in rep.rows:
        by_run.setdefault((row["M"], row["seed"]), {})[row["operator"]] = row["error_total"]
    dominated = all(v["power(0.5)"] > v["identity"] for v in by_run.values())
    fit = rep.fits["power(0.5)"]
    verdict(
        10,
        dominated and fit["passed"],
        f"derivative error above identity error on {sum(v['power(0.5)'] > v['identity'] for v in by_run.values())}"
        f"/{len(by_run)} runs; slope {fit['measured_exponent']:.3f} vs {fit['predicted_exponent']:.3f}",
    )
