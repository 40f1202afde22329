import math

import numpy as np
import pytest

from eignet.dataspace import DataSpace
from eignet.errors import ConfigError, DataError, ParameterError
from eignet.filtered_ops import DEFAULT_FILTER, sigma
from eignet.harness import (
    ExperimentConfig,
    band_norms,
    concentration_check,
    fit_loglog_slope,
    make_sobolev_function,
    run_rate_experiment,
    streamed_tv,
    thread_count,
)
from eignet.kernels import SVDKernel, validate_kernel
from eignet.synthesis import build_nu, l2_error, sample_network

S2 = DataSpace.sphere(2)

SMALL = {
    "kernel": {"variant": "svd", "q": 2, "bound": 8, "beta": 0},
    "gamma": 1.5,
    "M": [32, 128, 512],
    "seeds": [0, 1, 2],
    "name": "small",
}


def test_fit_exact_and_constant():
    x = np.geomspace(1, 100, 6)
    slope, icpt, res = fit_loglog_slope(list(zip(x, 3 * x**-0.7)))
    assert slope == pytest.approx(-0.7) and icpt == pytest.approx(math.log(3)) and res < 1e-12
    assert fit_loglog_slope(list(zip(x, np.full(6, 2.0))))[0] == pytest.approx(0.0, abs=1e-12)


def test_fit_noisy_power_law():
    rng = np.random.default_rng(0)
    x = np.geomspace(10, 1e4, 8)
    y = x**-0.5 * (1 + 0.1 * rng.standard_normal(8))
    assert fit_loglog_slope(list(zip(x, y)))[0] == pytest.approx(-0.5, abs=0.1)


def test_fit_rejects_bad_data():
    with pytest.raises(DataError):
        fit_loglog_slope([(1, 1), (2, 0.5)])
    with pytest.raises(DataError):
        fit_loglog_slope([(1, 1), (2, 0.0), (3, 0.1)])


@pytest.mark.parametrize("space", [S2, DataSpace.torus(2)])
@pytest.mark.parametrize("gamma", [0.5, 1.0, 2.0])
def test_sobolev_generator_hits_band_norms(space, gamma):
    f = make_sobolev_function(space, gamma, seed=4, levels=5, c=0.7)
    norms = band_norms(f)
    assert np.allclose(norms * 2.0 ** (gamma * np.arange(6)), 0.7, rtol=1e-10)


def test_sobolev_generator_profiles_and_limits():
    det = make_sobolev_function(S2, 1.0, profile="deterministic", levels=3)
    assert np.all(det.coeffs >= 0)
    a, b = make_sobolev_function(S2, 1.0, seed=1), make_sobolev_function(S2, 1.0, seed=2)
    assert not np.array_equal(a.coeffs, b.coeffs)
    with pytest.raises(ParameterError):
        make_sobolev_function(S2, 3.0, levels=4)
    with pytest.raises(ParameterError):
        make_sobolev_function(S2, 0.0)


def test_experiment_config_validation():
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({**SMALL, "M": [32, 64, 64]})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({**SMALL, "M": [32, 48, 64]})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({**SMALL, "colour": "red"})
    cfg = ExperimentConfig.from_dict({**SMALL, "tolerance": {"slope_rel": 0.3}})
    assert cfg.slope_tolerance == 0.3


def test_rate_experiment_is_deterministic_and_budgeted(monkeypatch):
    monkeypatch.setenv("EIGNET_THREADS", "1")
    one = run_rate_experiment(SMALL).csv_text()
    monkeypatch.setenv("EIGNET_THREADS", "3")
    rep = run_rate_experiment(SMALL)
    assert rep.csv_text() == one
    assert all(r["error_total"] >= r["error_sigma"] - 1e-12 for r in rep.rows)
    assert {r["regime"] for r in rep.rows} == {"above"}
    assert rep.fits["identity"]["abscissa"] == "M/(log M)^1"


def test_thread_count_parsing(monkeypatch):
    monkeypatch.setenv("EIGNET_THREADS", "abc")
    with pytest.raises(ConfigError):
        thread_count()
    monkeypatch.setenv("EIGNET_THREADS", "0")
    assert thread_count() == 1


def test_polynomial_target_decays_at_the_monte_carlo_rate():
    k = SVDKernel(S2, 4, beta=0.0)
    validate_kernel(k, 3.0, test_points=4)
    P = sigma(S2, DEFAULT_FILTER, 4, make_sobolev_function(S2, 1.0, seed=2, levels=2))
    nu = build_nu(P, k)
    Ms = [2**j for j in range(6, 14)]
    med = [np.median([l2_error(P, sample_network(nu, M, s)) for s in range(8)]) for M in Ms]
    assert -fit_loglog_slope(list(zip(Ms, med)))[0] == pytest.approx(0.5, abs=0.1)


def test_streamed_tv_matches_the_measure():
    k = SVDKernel(S2, 8, beta=1.0)
    validate_kernel(k, 3.0, test_points=4)
    P = sigma(S2, DEFAULT_FILTER, 4, make_sobolev_function(S2, 1.0, levels=3))
    assert streamed_tv(P, k, chunk=7) == pytest.approx(build_nu(P, k).tv, rel=1e-12)


def test_concentration_tail_below_envelope():
    k = SVDKernel(S2, 4, beta=0.0)
    validate_kernel(k, 3.0, test_points=4)
    P = sigma(S2, DEFAULT_FILTER, 4, make_sobolev_function(S2, 1.0, levels=2))
    res = concentration_check(build_nu(P, k), 50, S2.epsilon_net(0.25), trials=100)
    assert res.passed and res.envelope[-1] < 1e-2
    assert np.all(np.diff(res.empirical) <= 0)
