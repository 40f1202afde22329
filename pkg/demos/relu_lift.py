"""A ReLU network on the plane becomes a zonal network on the upper hemisphere.

Checks the lifted identity numerically, then rebuilds a smooth function on the
sphere from sampled ReLU atoms.
"""

import numpy as np

from eignet import DataSpace, ReLUKernel, SpectralFunction, build_nu, sample_network, validate_kernel
from eignet.kernels import lift_relu_network, lift_to_sphere, relu_activation, to_sphere
from eignet.synthesis import l2_error

rng = np.random.default_rng(0)
W, b, a = rng.standard_normal((8, 2)), rng.standard_normal(8), rng.standard_normal(8)
F = lambda x: relu_activation(1, x @ W.T + b) @ a
v, c = lift_relu_network(W, b, a, 1)
u = to_sphere(rng.standard_normal((500, 2)))
gap = np.max(np.abs(lift_to_sphere(F, 1)(u) - relu_activation(1, u @ v.T) @ c))
print(f"planar network vs lifted zonal network: max gap {gap:.1e}")

s2 = DataSpace.sphere(2)
kernel = ReLUKernel(s2, 12, 1)
print("uncovered degrees:", kernel.uncovered_degrees())
validate_kernel(kernel, 6.0, test_points=16)
f = SpectralFunction.zeros(s2, 5)
f.coeffs[[0, 2, 6]] = [1.0, 0.5, -0.3]  # degrees 0, 1, 2
nu = build_nu(f, kernel)
for M in (100, 1000, 10000):
    print(f"M={M:6d}  L2 error {l2_error(f, sample_network(nu, M, seed=1)):.4f}")
