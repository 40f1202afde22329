"""Twisted zonal kernels: rotation blocks and a reconstruction from rotated atoms."""

import numpy as np

from eignet import DataSpace, TwistedZonalKernel, build_nu, validate_kernel
from eignet.harness import make_sobolev_function
from eignet.filtered_ops import DEFAULT_FILTER, sigma
from eignet.kernels import random_rotations, rotation_matrix_elements
from eignet.synthesis import full_network

rng = np.random.default_rng(7)
s2 = DataSpace.sphere(2)
R1, R2 = random_rotations(2, 3, rng)
T1, T2, T12 = (rotation_matrix_elements(s2, R, 4) for R in (R1, R2, R1 @ R2))
print(f"orthogonality defect {np.max(np.abs(T1.T @ T1 - np.eye(len(T1)))):.1e}")
print(f"composition defect   {np.max(np.abs(T12 - T2 @ T1)):.1e}  (blocks compose in reverse order)")

kernel = TwistedZonalKernel(s2, 16, {"type": "power", "beta0": 1.0}, random_rotations(3, 3, rng))
report = validate_kernel(kernel, 8.0, test_points=16)
print(f"max connection residual {report.max_residual:.1e}")
P = sigma(s2, DEFAULT_FILTER, 8, make_sobolev_function(s2, 1.0, seed=3, levels=4))
net = full_network(build_nu(P, kernel))
x = s2.random_points(200, rng)
print(f"full network vs target: {np.max(np.abs(net.evaluate(x) - P.evaluate(x))):.1e} with {len(net)} atoms")
