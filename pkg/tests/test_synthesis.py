import json
import math

import numpy as np
import pytest

from eignet.dataspace import DataSpace
from eignet.errors import CapacityError, CoverageError, DegenerateInputError, PreconditionError
from eignet.filtered_ops import DEFAULT_FILTER, Multiplier, SpectralFunction, sigma
from eignet.harness import make_sobolev_function
from eignet.kernels import GTNKernel, ReLUKernel, SVDKernel, TwistedZonalKernel, random_rotations, validate_kernel
from eignet.synthesis import (
    ABOVE,
    BELOW,
    BOUNDARY,
    Network,
    RateSpec,
    build_nu,
    full_network,
    hoeffding_bound,
    l2_error,
    predicted_rate,
    real_part,
    regime,
    sample_network,
    synthesize,
    t_n,
    tv_norm,
)

S2 = DataSpace.sphere(2)
T2 = DataSpace.torus(2)


def validated(kernel):
    validate_kernel(kernel, 3.0, test_points=4)
    return kernel


def poly(space, bound, seed):
    f = make_sobolev_function(space, 1.0, seed=seed, levels=int(math.log2(bound)))
    return sigma(space, DEFAULT_FILTER, bound, f)


@pytest.mark.parametrize(
    "kernel",
    [
        SVDKernel(S2, 8, beta=1.0, mix_seed=2),
        SVDKernel(T2, 8, beta=0.5),
        TwistedZonalKernel(S2, 8, {"type": "power", "beta0": 1.0}, random_rotations(2, 3, np.random.default_rng(0))),
        GTNKernel(2, 1, 8, {"type": "poisson", "rho": 0.5, "order": 4}),
    ],
    ids=["svd-sphere", "svd-torus", "twisted", "translation"],
)
def test_full_network_reproduces_the_polynomial(kernel):
    validated(kernel)
    P = poly(kernel.X, 4, 1)
    net = full_network(build_nu(P, kernel))
    x = kernel.X.random_points(50, np.random.default_rng(3))
    assert np.allclose(net.evaluate(x), P.evaluate(x), atol=1e-10)
    assert l2_error(P, net) < 1e-10


def test_build_nu_preconditions():
    k = SVDKernel(S2, 4)
    P = poly(S2, 4, 0)
    with pytest.raises(PreconditionError):
        build_nu(P, k)
    validated(k)
    with pytest.raises(CapacityError):
        build_nu(poly(S2, 8, 0), k)
    relu = validated(ReLUKernel(S2, 8, 1))
    f = SpectralFunction.zeros(S2, 8)
    f.coeffs[S2.enumeration(8).degrees == 3] = 1.0
    with pytest.raises(CoverageError) as info:
        build_nu(f, relu)
    assert list(info.value.uncovered) == [3]


def test_sampling_is_unbiased_in_expectation():
    k = validated(SVDKernel(S2, 4, beta=0.0))
    P = poly(S2, 4, 5)
    nu = build_nu(P, k)
    spectra = [sample_network(nu, 400, s).spectrum().coeffs for s in range(200)]
    mean = np.mean(spectra, axis=0)
    sd = np.std(spectra, axis=0) / math.sqrt(len(spectra))
    target = P.project(k.bound).coeffs
    assert np.all(np.abs(mean - target) < 5 * sd + 1e-12)


def test_sampled_network_structure_and_determinism():
    k = validated(SVDKernel(S2, 4))
    nu = build_nu(poly(S2, 4, 6), k)
    a, b = sample_network(nu, 100, 7), sample_network(nu, 100, 7)
    assert np.array_equal(a.y, b.y) and np.array_equal(a.weights, b.weights)
    assert set(np.unique(a.weights)) <= {-1.0, 1.0}
    assert a.scale == pytest.approx(nu.tv / 100)
    with pytest.raises(DegenerateInputError):
        tv_norm(np.zeros(3))


def test_network_json_round_trip():
    k = validated(SVDKernel(T2, 4, beta=0.5))
    net = sample_network(build_nu(poly(T2, 4, 8), k), 50, 1)
    obj = json.loads(net.dumps())
    assert set(obj) == {"kernel", "scale", "atoms", "provenance"}
    assert set(obj["atoms"][0]) == {"l", "y", "w"}
    back = Network.from_json(obj)
    x = T2.random_points(10, np.random.default_rng(0))
    assert np.array_equal(back.evaluate(x), net.evaluate(x))


def test_l2_error_agrees_with_quadrature():
    k = validated(SVDKernel(S2, 6, beta=1.0))
    f = poly(S2, 4, 9)
    net = sample_network(build_nu(f, k), 30, 2)
    x, w = S2.quadrature(8)
    direct = math.sqrt(np.sum(w * (f.evaluate(x) - net.evaluate(x)) ** 2))
    assert l2_error(f, net) == pytest.approx(direct, rel=1e-10)


def test_relu_l2_error_includes_the_activation_tail():
    k = validated(ReLUKernel(S2, 8, 1))
    f = SpectralFunction.constant(S2, 1.0)
    net = sample_network(build_nu(f, k), 20, 3)
    x, w = S2.quadrature(200)
    direct = math.sqrt(np.sum(w * (f.evaluate(x) - net.evaluate(x)) ** 2))
    assert l2_error(f, net) == pytest.approx(direct, rel=1e-3)


def test_real_part_symmetrizes_torus_coefficients():
    f = SpectralFunction.zeros(T2, 2)
    f.coeffs[1] = 2.0 + 2.0j
    g = real_part(f)
    x = T2.random_points(5, np.random.default_rng(1))
    assert np.allclose(g.evaluate(x), f.evaluate(x))


def test_regimes_and_envelopes():
    assert regime(0.5, 0.0, 2) == BELOW
    assert regime(1.0, 0.0, 2) == BOUNDARY
    assert regime(2.0, 0.0, 2) == ABOVE
    assert t_n(0.5, 0.0, 2, 3) == pytest.approx(2**1.5)
    assert t_n(1.0, 0.0, 2, 3) == 3.0
    assert t_n(2.0, 0.0, 2, 3) == 1.0
    assert hoeffding_bound(100, 0.5, 2.0) == pytest.approx(2 * math.exp(-12.5))


def test_predicted_exponents():
    below = predicted_rate(RateSpec(gamma=0.5, q=2), 0.0, "svd")
    assert below.exponent == pytest.approx(0.25) and below.log_power == 1.0
    boundary = predicted_rate(RateSpec(gamma=1.0, q=2), 0.0, "svd")
    assert boundary.exponent == pytest.approx(0.5) and boundary.log_power == 3.0
    above = predicted_rate(RateSpec(gamma=1.5, q=2, a=[0.0, 0.5]), 0.5, "svd")
    assert above.exponent == pytest.approx(1.0 / 3.0)
    relu = predicted_rate(RateSpec(gamma=1.5, q=2), 0.0, "relu", r=1)
    assert relu.exponent == pytest.approx(0.5) and relu.log_power == pytest.approx(1.0)
    with pytest.raises(PreconditionError):
        RateSpec(gamma=0.2, q=2, a=[0.5]).check()


def test_synthesize_reports_diagnostics():
    k = validated(SVDKernel(S2, 16, beta=1.0))
    f = make_sobolev_function(S2, 1.5, seed=1, levels=4)
    spec = RateSpec(gamma=1.5, q=2, beta=1.0, a=[0.0, 0.5])
    net, diag = synthesize(f, k, spec, 500, [Multiplier.identity(), Multiplier.power(0.5)], seed=4, n=3)
    assert len(net) == 500 and diag.n == 3 and diag.regime == BELOW
    assert set(diag.sigma_errors) == {"identity", "power(0.5)"}
    with pytest.warns(RuntimeWarning):
        zero, _ = synthesize(SpectralFunction.zeros(S2, 4), k, spec, 10, n=1)
    assert len(zero) == 0
