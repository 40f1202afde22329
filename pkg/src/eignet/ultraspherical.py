"""Orthonormal ultraspherical polynomials and zonal kernels on the sphere S^q.

The polynomials ``p_j`` are orthonormal on [-1, 1] against the (unnormalized)
weight ``(1 - t**2)**(q/2 - 1)``.  With this convention the reproducing kernel
of the degree-``j`` spherical harmonics, with respect to the normalized surface
measure, is

    K_j(t) = (omega_q / omega_{q-1}) * p_j(1) * p_j(t).
"""

from functools import cached_property

import numpy as np
from scipy.special import gammaln

from .errors import CapacityError, DomainError

_T_TOL = 1e-12


def sphere_volume(q):
    """Surface area ``omega_q`` of the unit sphere S^q in R^{q+1}."""
    if q < 1:
        raise DomainError(f"sphere dimension must be >= 1, got {q}")
    return float(np.exp(np.log(2.0) + 0.5 * (q + 1) * np.log(np.pi) - gammaln(0.5 * (q + 1))))


def volume_ratio(q):
    """``omega_q / omega_{q-1}``; equals 2 on S^2 and pi on S^1."""
    if q == 1:
        return np.pi
    return sphere_volume(q) / sphere_volume(q - 1)


def weight_mass(q):
    """Integral of ``(1 - t**2)**(q/2 - 1)`` over [-1, 1]."""
    a = 0.5 * q - 1.0
    return float(np.exp(0.5 * np.log(np.pi) + gammaln(a + 1.0) - gammaln(a + 1.5)))


def _check_t(t):
    t = np.asarray(t, dtype=float)
    if t.size and np.max(np.abs(t)) > 1.0 + _T_TOL:
        raise DomainError(f"|t| must be <= 1, got max |t| = {np.max(np.abs(t))!r}")
    return np.clip(t, -1.0, 1.0)


class UltrasphericalBasis:
    """Orthonormal polynomials ``p_0, ..., p_max_degree`` for sphere dimension ``q``.

    Values come from the three-term recurrence of the symmetric Jacobi family
    with ``alpha = beta = q/2 - 1``, started from the exact normalization
    ``p_0 = weight_mass(q) ** -0.5``.
    """

    def __init__(self, q, max_degree=64):
        if q < 1:
            raise DomainError(f"sphere dimension must be >= 1, got {q}")
        if max_degree < 0:
            raise CapacityError("max_degree must be nonnegative")
        self.q = int(q)
        self.max_degree = int(max_degree)
        self.alpha = 0.5 * q - 1.0
        # c[j] couples p_j and p_{j-1}:  t p_j = c[j+1] p_{j+1} + c[j] p_{j-1}
        a = self.alpha
        j = np.arange(self.max_degree + 2, dtype=float)
        b = np.zeros_like(j)
        if b.size > 1:
            b[1] = 1.0 / (3.0 + 2.0 * a)
        jj = j[2:]
        b[2:] = jj * (jj + 2 * a) / ((2 * jj + 2 * a + 1) * (2 * jj + 2 * a - 1))
        self.recurrence = np.sqrt(b)
        self.p0 = weight_mass(q) ** -0.5

    def __repr__(self):
        return f"UltrasphericalBasis(q={self.q}, max_degree={self.max_degree})"

    def _check_degree(self, j):
        if j < 0 or j > self.max_degree:
            raise CapacityError(f"degree {j} outside [0, {self.max_degree}]")

    def eval_all(self, t, degree=None):
        """Array of shape ``(degree + 1,) + t.shape`` with ``p_0(t), ..., p_degree(t)``."""
        degree = self.max_degree if degree is None else int(degree)
        self._check_degree(degree)
        t = _check_t(t)
        c = self.recurrence
        out = np.empty((degree + 1,) + t.shape)
        out[0] = self.p0
        if degree >= 1:
            out[1] = t * out[0] / c[1]
        for k in range(1, degree):
            out[k + 1] = (t * out[k] - c[k] * out[k - 1]) / c[k + 1]
        return out

    def eval(self, j, t):
        self._check_degree(j)
        return self.eval_all(t, j)[j]

    def eval_with_derivative(self, t, degree):
        t = np.asarray(t, dtype=float)
        c = self.recurrence
        p = np.empty((degree + 1,) + t.shape)
        dp = np.zeros_like(p)
        p[0] = self.p0
        if degree >= 1:
            p[1] = t * p[0] / c[1]
            dp[1] = p[0] / c[1]
        for k in range(1, degree):
            p[k + 1] = (t * p[k] - c[k] * p[k - 1]) / c[k + 1]
            dp[k + 1] = (p[k] + t * dp[k] - c[k] * dp[k - 1]) / c[k + 1]
        return p, dp

    @cached_property
    def values_at_one(self):
        return self.eval_all(1.0)

    def gauss_jacobi(self, n):
        """``n``-point Gauss rule for the weight ``(1 - t**2)**(q/2 - 1)``.

        Nodes start from the eigenvalues of the Jacobi matrix and are polished
        by Newton steps on ``p_n``; weights are Christoffel numbers
        ``1 / sum_k p_k(t_i)**2``.  Exact for polynomials of degree ``2n - 1``.
        """
        if n < 1:
            raise CapacityError("need at least one node")
        if n > self.max_degree:
            raise CapacityError(f"{n}-point rule needs max_degree >= {n}")
        off = self.recurrence[1:n]
        jac = np.diag(off, 1) + np.diag(off, -1)
        x = np.linalg.eigvalsh(jac)
        for _ in range(10):
            p, dp = self.eval_with_derivative(x, n)
            step = p[n] / dp[n]
            x = x - step
            if np.max(np.abs(step)) < 1e-14:
                break
        x = np.clip(x, -1.0, 1.0)
        x = 0.5 * (x - x[::-1])  # enforce exact symmetry
        p = self.eval_all(x, n - 1)
        w = 1.0 / np.sum(p * p, axis=0)
        return x, w

    def projector(self, j, t):
        """Reproducing kernel of the degree-``j`` harmonics against the probability measure."""
        self._check_degree(j)
        return volume_ratio(self.q) * self.values_at_one[j] * self.eval(j, t)

    def zonal_series(self, coeffs, t):
        """Evaluate ``sum_j coeffs[j] * K_j(t)``."""
        coeffs = np.asarray(coeffs, dtype=float)
        deg = coeffs.size - 1
        p = self.eval_all(t, deg)
        scale = volume_ratio(self.q) * coeffs * self.values_at_one[: deg + 1]
        return np.tensordot(scale, p, axes=(0, 0))

    def zonal_coefficients(self, g, degree, nodes=None):
        """Coefficients ``g_hat(j)`` with ``g(t) ~ sum_j g_hat(j) K_j(t)``, by Gauss quadrature.

        Only accurate for smooth ``g``; non-smooth profiles need split rules.
        """
        n = nodes or degree + 1
        t, w = UltrasphericalBasis(self.q, max(n, degree)).gauss_jacobi(n)
        p = self.eval_all(t, degree)
        gv = np.asarray(g(t), dtype=float)
        # int g p_j w = g_hat(j) * ratio * p_j(1)
        integ = p @ (w * gv)
        return integ / (volume_ratio(self.q) * self.values_at_one[: degree + 1])


def eval_ultraspherical(basis, j, t):
    return basis.eval(j, t)


def zonal_projector_kernel(basis, j, t):
    return basis.projector(j, t)
