"""Fast invariant checks behind ``eignet selftest``."""

import time

import numpy as np

from .dataspace import DataSpace
from .errors import InvalidKernelError
from .filtered_ops import DEFAULT_FILTER, SpectralFunction, sigma, tau_norms
from .harness import make_sobolev_function
from .kernels import (
    GTNKernel,
    SVDKernel,
    TwistedZonalKernel,
    random_rotations,
    rotation_matrix_elements,
    validate_kernel,
)
from .synthesis import Network, build_nu, full_network


def _random_poly(space, bound, rng):
    f = SpectralFunction.zeros(space, bound)
    n = f.coeffs.size
    f.coeffs = rng.standard_normal(n) + (1j * rng.standard_normal(n) if space.is_complex else 0.0)
    return f


def check_reproduction(rng):
    worst = 0.0
    for space in (DataSpace.sphere(2), DataSpace.torus(2)):
        P = _random_poly(space, 8, rng)
        x = space.random_points(200, rng)
        worst = max(worst, float(np.max(np.abs(sigma(space, DEFAULT_FILTER, 16, P).evaluate(x) - P.evaluate(x)))))
    return worst < 1e-8, f"max |sigma_16 P - P| = {worst:.2e}"


def check_quadrature(rng):
    worst = 0.0
    for space in (DataSpace.sphere(2), DataSpace.torus(2), DataSpace.sphere(1)):
        x, w = space.quadrature(10)
        B = space.basis(x, 10)
        worst = max(worst, float(np.max(np.abs(B.conj().T @ (w[:, None] * B) - np.eye(B.shape[1])))))
    return worst < 1e-10, f"max Gram deviation = {worst:.2e}"


def check_connections(rng):
    s2 = DataSpace.sphere(2)
    kernels = [
        SVDKernel(s2, 8, beta=1.0, mix_seed=1),
        TwistedZonalKernel(s2, 8, {"type": "power", "beta0": 1.0}, random_rotations(2, 3, rng)),
        GTNKernel(2, 1, 8, {"type": "poisson", "rho": 0.5, "order": 4}),
    ]
    worst = max(validate_kernel(k, 4.0, test_points=8).max_residual for k in kernels)
    return worst < 1e-8, f"max connection residual = {worst:.2e}"


def check_rotations(rng):
    s2 = DataSpace.sphere(2)
    worst = 0.0
    for R in random_rotations(3, 3, rng):
        T = rotation_matrix_elements(s2, R, 4)
        worst = max(worst, float(np.max(np.abs(T.T @ T - np.eye(T.shape[0])))))
    return worst < 1e-10, f"max |T^T T - I| = {worst:.2e}"


def check_gtn_rejection(rng):
    try:
        GTNKernel(2, 1, 4, {"type": "coeffs", "terms": [[0, 1.0], [2, 0.5]]})
    except InvalidKernelError:
        return True, "vanishing coefficient at 1 rejected"
    return False, "kernel with vanishing coefficient at 1 was accepted"


def check_infinite_network(rng):
    s2 = DataSpace.sphere(2)
    k = SVDKernel(s2, 8, beta=1.0)
    validate_kernel(k, 2.0, test_points=4)
    P = _random_poly(s2, 6, rng)
    net = full_network(build_nu(P, k))
    x = s2.random_points(100, rng)
    err = float(np.max(np.abs(net.evaluate(x) - P.evaluate(x))))
    back = Network.from_json(net.to_json(), k)
    rt = float(np.max(np.abs(back.evaluate(x) - net.evaluate(x))))
    return err < 1e-8 and rt == 0.0, f"full-network error {err:.2e}, JSON round trip {rt:.1e}"


def check_band_norms(rng):
    f = make_sobolev_function(DataSpace.sphere(2), 1.0, seed=3, levels=4)
    t = tau_norms(f.space, DEFAULT_FILTER, f, range(5)) * 2.0 ** np.arange(5)
    dev = float(np.max(np.abs(t - 1.0)))
    return dev < 1e-10, f"max |2^j ||tau_j f|| - 1| = {dev:.2e}"


CHECKS = [
    ("filter reproduces polynomials", check_reproduction),
    ("quadrature orthonormality", check_quadrature),
    ("kernel connection residuals", check_connections),
    ("rotation blocks orthogonal", check_rotations),
    ("degenerate translation kernel rejected", check_gtn_rejection),
    ("full network reproduces its target", check_infinite_network),
    ("test function band norms", check_band_norms),
]


def run_selftest(seed=0, out=print):
    rng = np.random.default_rng(seed)
    ok_all = True
    for name, fn in CHECKS:
        t0 = time.perf_counter()
        ok, detail = fn(rng)
        ok_all &= bool(ok)
        out(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail} ({time.perf_counter() - t0:.1f}s)")
    return ok_all
