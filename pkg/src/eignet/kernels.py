"""Asymmetric eignet kernels: SVD, twisted zonal, generalized translation and ReLU^r.

Every kernel ``G(ell; x, y)`` comes with a connection map ``D_G phi_ell`` on
its parameter space Y such that

    phi_ell(x) = int_Y G(ell; x, y) D_G phi_ell(y) dmu_Y(y).

Indices ``ell`` are positions in the enumeration of the input space X (see
:meth:`DataSpace.enumeration`).  Y points are stored as float arrays whose
layout depends on the variant; :attr:`EignetKernel.y_dim` gives the width.
"""

from dataclasses import dataclass, field
import math

import numpy as np
from scipy.spatial.transform import Rotation
from scipy.special import gammaln, gammasgn, roots_jacobi

from .dataspace import TWO_PI, DataSpace
from .errors import (
    CapacityError,
    CompatibilityError,
    ConfigError,
    DomainError,
    InvalidKernelError,
    ParameterError,
)
from .filtered_ops import Multiplier, SpectralFunction
from .ultraspherical import UltrasphericalBasis, volume_ratio, weight_mass

# ---------------------------------------------------------------------------
# ReLU^r activation and its ultraspherical expansion
# ---------------------------------------------------------------------------


def is_integer_exponent(r):
    return float(r).is_integer()


def relu_activation(r, t):
    """``max(t, 0)**r`` for integer ``r`` and ``|t|**r`` otherwise."""
    t = np.asarray(t, dtype=float)
    if r <= 0:
        raise DomainError("ReLU exponent must be positive")
    if is_integer_exponent(r):
        return np.maximum(t, 0.0) ** r
    return np.abs(t) ** r


def _log_gamma_ratio(num, den):
    """``log|prod Gamma(num)/prod Gamma(den)|`` and its sign; sign 0 if some ``den`` is a pole."""
    num = np.atleast_1d(np.asarray(num, dtype=float))
    den = np.atleast_1d(np.asarray(den, dtype=float))
    for v in num:
        if v <= 0 and v.is_integer():
            raise DomainError(f"Gamma pole at argument {v:g}")
    if any(v <= 0 and v.is_integer() for v in den):
        return -np.inf, 0.0
    logv = float(np.sum(gammaln(num)) - np.sum(gammaln(den)))
    sign = float(np.prod(gammasgn(num)) * np.prod(gammasgn(den)))
    return logv, sign


def relu_profile_coefficient(q, r, j):
    """Coefficient ``b_j`` of the degree-``j`` term in ``G_r(t) ~ sum_j b_j p_j(1) p_j(t)``.

    Equivalently ``b_j = int_{-1}^{1} G_r(t) p_j(t) / p_j(1) (1 - t^2)^{q/2-1} dt``.
    Splitting ``p_j/p_j(1)`` into its even or odd part via the quadratic
    transformation of Jacobi polynomials turns the half-line integral into a
    Beta-type integral with the closed form

        b_j = (1/2) Gamma(a+1) Gamma(c) Gamma(c-b) / (Gamma(c-b-n) Gamma(c+a+n+1))

    where ``a = q/2 - 1``, ``n = j // 2`` and ``(b, c) = (-1/2, (r+1)/2)`` for even
    ``j`` or ``(1/2, r/2 + 1)`` for odd ``j``.  This is the coefficient of
    ``max(t, 0)**r``; for ``|t|**r`` even terms double and odd terms vanish.
    """
    if j < 0:
        raise DomainError(f"degree must be nonnegative, got {j}")
    a = 0.5 * q - 1.0
    n, odd = divmod(int(j), 2)
    b, c = (0.5, 0.5 * r + 1.0) if odd else (-0.5, 0.5 * (r + 1.0))
    logv, sign = _log_gamma_ratio([a + 1.0, c, c - b], [c - b - n, c + a + n + 1.0])
    plus = 0.5 * sign * math.exp(logv) if sign else 0.0
    if is_integer_exponent(r):
        return plus
    return 0.0 if odd else 2.0 * plus


def relu_expansion_coeff(q, r, ell):
    """Gamma-ratio coefficient of the ReLU^r expansion at index ``ell``.

    For integer ``r`` this multiplies ``p_{2 ell + r + 1}(1) p_{2 ell + r + 1}(t)``:

        Gamma(q/2) Gamma(r+1) / (2^{r+1} sqrt(pi)) * (-1)^ell
            * Gamma(ell + 1/2) / Gamma(ell + 1/2 + (q + 2r + 1)/2)

    For non-integer ``r`` it multiplies ``p_{2 ell}(1) p_{2 ell}(t)``:

        Gamma(q/2) Gamma((r+1)/2) / Gamma(-r/2) * (-1)^ell
            * Gamma(ell - r/2) / Gamma(ell + (q + r + 1)/2)

    Both agree with :func:`relu_profile_coefficient` at the matching degree.
    Evaluated in log-Gamma form, so ``ell`` in the thousands is fine.
    """
    if ell < 0 or int(ell) != ell:
        raise DomainError(f"expansion index must be a nonnegative integer, got {ell!r}")
    ell = int(ell)
    sgn = -1.0 if ell % 2 else 1.0
    if is_integer_exponent(r):
        logv, sign = _log_gamma_ratio(
            [0.5 * q, r + 1.0, ell + 0.5], [ell + 0.5 + 0.5 * (q + 2 * r + 1)]
        )
        logv -= (r + 1.0) * math.log(2.0) + 0.5 * math.log(math.pi)
    else:
        logv, sign = _log_gamma_ratio(
            [0.5 * q, 0.5 * (r + 1.0), ell - 0.5 * r], [-0.5 * r, ell + 0.5 * (q + r + 1.0)]
        )
    return sgn * sign * math.exp(logv)


def relu_covered_degrees(r, jmax):
    """Degrees ``j <= jmax`` with a nonzero expansion coefficient."""
    j = np.arange(jmax + 1)
    if is_integer_exponent(r):
        return j[(j <= r) | ((j - int(r) - 1) % 2 == 0)]
    return j[j % 2 == 0]


# ---------------------------------------------------------------------------
# The lift between R^q and the upper hemisphere
# ---------------------------------------------------------------------------


def to_sphere(x):
    """``pi*(x) = (x, 1) / sqrt(1 + |x|^2)``; maps R^q onto the open upper hemisphere."""
    x = np.asarray(x, dtype=float)
    ext = np.concatenate([x, np.ones(x.shape[:-1] + (1,))], axis=-1)
    return ext / np.linalg.norm(ext, axis=-1, keepdims=True)


def from_sphere(u):
    """Inverse of :func:`to_sphere`: ``u[:q] / u[q]`` for ``u[q] > 0``."""
    u = np.asarray(u, dtype=float)
    if np.any(u[..., -1] <= 0):
        raise DomainError("points must lie in the open upper hemisphere (last coordinate > 0)")
    return u[..., :-1] / u[..., -1:]


def lift_to_sphere(F, r, parity=None):
    """Function ``f(u) = u_{q+1}^r F(u_{1..q} / u_{q+1})`` on the sphere.

    A ReLU^r network in R^q, ``F(x) = sum a_j G_r(w_j . x + b_j)``, becomes
    ``f(u) = sum a_j |(w_j, b_j)|^r G_r(u . v_j)`` with ``v_j`` the unit vector along
    ``(w_j, b_j)``; see :func:`lift_relu_network`.  ``parity`` selects the even or
    odd extension to the lower hemisphere; without it, points with
    ``u_{q+1} <= 0`` raise :class:`DomainError`.  The equator maps to 0.
    """
    if parity not in (None, "even", "odd"):
        raise ParameterError("parity must be None, 'even' or 'odd'")

    def f(u):
        u = np.asarray(u, dtype=float)
        last = u[..., -1]
        if parity is None and np.any(last <= 0):
            raise DomainError("point outside the upper hemisphere and no parity extension requested")
        flip = last < 0
        uu = np.where(flip[..., None], -u, u)
        out = np.zeros(last.shape)
        inside = np.abs(uu[..., -1]) > 0
        h = uu[inside, -1]
        out[inside] = h**r * np.asarray(F(uu[inside, :-1] / h[:, None]), dtype=float)
        if parity == "odd":
            out = np.where(flip, -out, out)
        return out

    return f


def lift_relu_network(weights, biases, coeffs, r):
    """Unit vectors ``v_j`` and rescaled coefficients ``a_j |(w_j, b_j)|^r`` of a lifted network."""
    W = np.atleast_2d(np.asarray(weights, dtype=float))
    wb = np.concatenate([W, np.asarray(biases, dtype=float)[:, None]], axis=1)
    norms = np.linalg.norm(wb, axis=1)
    if np.any(norms == 0):
        raise DomainError("a neuron with zero weight and bias cannot be lifted")
    return wb / norms[:, None], np.asarray(coeffs, dtype=float) * norms**r


# ---------------------------------------------------------------------------
# Rotations and matrix families
# ---------------------------------------------------------------------------


def rotation_from_axis_angle(v):
    """Rotation matrix from an axis-angle vector (3-vector) or an angle (circle)."""
    v = np.atleast_1d(np.asarray(v, dtype=float))
    if v.size == 1:
        c, s = math.cos(v[0]), math.sin(v[0])
        return np.array([[c, -s], [s, c]])
    if v.size != 3:
        raise ConfigError("rotations are angles (S^1) or axis-angle triples (S^2)")
    return Rotation.from_rotvec(v).as_matrix()


def random_rotations(count, dim, rng):
    if dim == 3:
        return list(Rotation.random(count, random_state=rng).as_matrix())
    return [rotation_from_axis_angle(a) for a in rng.uniform(0, TWO_PI, count)]


def rotation_matrix_elements(space, R, L, degree=None):
    """Matrix ``T[k, l] = int phi_l(x) phi_k(R^{-1} x) dmu(x)`` over all degrees ``<= L``.

    Block diagonal by degree and orthogonal.  ``degree`` is the quadrature
    degree to use (default: the smallest exact one, ``L + 1``).
    """
    if space.is_torus or space.q > 2:
        raise CapacityError("rotation blocks are implemented on S^1 and S^2")
    R = np.asarray(R, dtype=float)
    if R.shape != (space.q + 1, space.q + 1):
        raise DomainError("rotation has the wrong shape for this sphere")
    if np.max(np.abs(R.T @ R - np.eye(space.q + 1))) > 1e-12 or np.linalg.det(R) < 0:
        raise DomainError("R must be a proper rotation (orthogonal, det 1)")
    need = L + 1
    degree = need if degree is None else int(degree)
    if degree < need:
        raise CapacityError(f"quadrature degree {degree} cannot resolve degree-{L} blocks (need {need})")
    x, w = space.quadrature(degree)
    B = space.basis(x, L + 1)
    BR = space.basis(x @ R, L + 1)  # rows of x @ R are R^{-1} x
    T = (BR * w[:, None]).T @ B
    deg = space.enumeration(L + 1).degrees
    T[deg[:, None] != deg[None, :]] = 0.0
    return T


def gtn_matrix(k, q):
    """Integer ``q x Q`` matrix with the entries of ``k`` stacked along shifted diagonals.

    Entry ``k[i]`` goes to row ``i mod q``, column ``i``, so ``A.T @ ones = k``.
    """
    k = np.asarray(k, dtype=int)
    Q = k.shape[-1]
    if not 1 <= q <= Q:
        raise ParameterError(f"need 1 <= q <= Q, got q={q}, Q={Q}")
    A = np.zeros(k.shape[:-1] + (q, Q), dtype=int)
    cols = np.arange(Q)
    A[..., cols % q, cols] = k
    return A


# ---------------------------------------------------------------------------
# Kernel base class
# ---------------------------------------------------------------------------


def _as_operator(op):
    if op is None:
        return Multiplier.identity()
    if isinstance(op, Multiplier):
        return op
    if isinstance(op, dict):
        return Multiplier.from_config(op)
    raise CompatibilityError(f"operator {op!r} is not a spectral multiplier")


def _multiplier_values(op, lam):
    b = np.asarray(op(lam), dtype=float)
    if not np.all(np.isfinite(b)):
        raise CompatibilityError(f"operator {op.name} is not finite on the kernel spectrum")
    return b


class EignetKernel:
    """Common interface.  Subclasses set ``variant``, ``X``, ``alpha``, ``beta``, ``bound``.

    ``bound`` is the spectral bound of the supported indices: ``ell`` must
    satisfy ``lambda_ell < bound``; for series kernels it is also the
    truncation of the expansion.
    """

    variant = "abstract"
    validation = None
    ell_independent = True
    complex_valued = False
    alpha = 1.0
    beta = 0.0

    # -- indices --------------------------------------------------------

    def enumeration(self, bound=None):
        return self.X.enumeration(self.bound if bound is None else bound)

    def check_ells(self, ells):
        ells = np.atleast_1d(np.asarray(ells))
        if ells.size and (ells.min() < 0 or ells.max() >= len(self.enumeration())):
            raise CapacityError(
                f"index outside the {len(self.enumeration())} indices supported (lambda < {self.bound})"
            )
        return ells.astype(int)

    def covered(self, bound=None):
        """Boolean mask over indices below ``bound``: True where the connection map exists."""
        return np.ones(len(self.enumeration(bound)), dtype=bool)

    def uncovered_degrees(self, bound=None):
        enum = self.enumeration(bound)
        return sorted(set(int(d) for d in enum.degrees[~self.covered(bound)]))

    # -- interface to implement ----------------------------------------

    def evaluate(self, ells, x, y, op=None):
        """Matrix ``[U]G(ells[j]; x_i, y_j)`` of shape ``(len(x), len(y))``."""
        raise NotImplementedError

    def connection(self, ells, y):
        """Matrix ``D_G phi_ell(y_i)`` of shape ``(len(ells), len(y))``."""
        raise NotImplementedError

    def y_quadrature(self, bound):
        """Nodes and weights on Y exact for the connection integrals of indices below ``bound``."""
        raise NotImplementedError

    def network_spectrum(self, ells, y, weights, op=None):
        """X-coefficients of ``sum_j weights[j] [U]G(ells[j]; ., y[j])`` as a SpectralFunction."""
        raise NotImplementedError

    def to_config(self):
        raise NotImplementedError

    # -- shared diagnostics --------------------------------------------

    def check_operator(self, op):
        op = _as_operator(op)
        _multiplier_values(op, self.enumeration().lambdas)
        return op

    def connection_residuals(self, ells, xtest):
        """``sup_x |phi_ell(x) - int G(ell; x, y) D_G phi_ell(y) dmu_Y(y)|`` per index."""
        ells = self.check_ells(ells)
        if ells.size == 0:
            return np.zeros(0)
        bound = float(self.enumeration().lambdas[ells.max()]) + 1.0
        y, w = self.y_quadrature(bound)
        D = self.connection(ells, y) * w[None, :]
        phi = self.X.basis(xtest, bound)[:, ells]
        out = np.empty(ells.size)
        if self.ell_independent:
            G = self.evaluate(0, xtest, y)
            out[:] = np.max(np.abs(phi - G @ D.T), axis=0)
            return out
        for i, ell in enumerate(ells):
            G = self.evaluate(np.full(len(y), ell), xtest, y)
            out[i] = np.max(np.abs(phi[:, i] - G @ D[i]))
        return out

    def d_norms(self, ells):
        """``int |D_G phi_ell|^2 dmu_Y`` per index."""
        ells = self.check_ells(ells)
        if ells.size == 0:
            return np.zeros(0)
        bound = float(self.enumeration().lambdas[ells.max()]) + 1.0
        y, w = self.y_quadrature(bound)
        D = self.connection(ells, y)
        return np.abs(D) ** 2 @ w

    def sup_and_lipschitz(self, n, op=None, rng=None, samples=16):
        """Estimates of ``sup ||[U]G(ell; ., y)||_inf`` and of its Lip(alpha) norm over ``ell < n``."""
        raise NotImplementedError


# ---------------------------------------------------------------------------
# SVD kernels
# ---------------------------------------------------------------------------


def _haar_orthogonal(n, rng, complex_=False):
    z = rng.standard_normal((n, n))
    if complex_:
        z = z + 1j * rng.standard_normal((n, n))
    qm, rm = np.linalg.qr(z)
    d = np.diag(rm)
    return qm * (d / np.abs(d))


class SVDKernel(EignetKernel):
    """``G(x, y) = sum_{lambda_k < bound} phi_k(x) conj(psi_k(y)) / Lambda_k`` on Y = X.

    ``Lambda_k = (1 + lambda_k)**beta``.  ``psi`` is ``phi`` mixed by a Haar-random
    orthogonal (unitary on the torus) matrix inside each eigenspace when
    ``mix_seed`` is given, and ``phi`` itself otherwise.
    """

    variant = "svd"

    def __init__(self, space, bound, beta=0.0, mix_seed=None):
        if space.q > 2 and not space.is_torus:
            raise CapacityError("SVD kernels need basis evaluation, available on S^1, S^2 and tori")
        self.X = space
        self.bound = float(bound)
        self.beta = float(beta)
        self.mix_seed = mix_seed
        enum = space.enumeration(self.bound)
        self.singular_values = (1.0 + enum.lambdas) ** self.beta
        self.complex_valued = space.is_complex
        N = len(enum)
        self.mixing = None
        if mix_seed is not None:
            rng = np.random.default_rng(mix_seed)
            O = np.zeros((N, N), dtype=complex if space.is_complex else float)
            for d in np.unique(enum.degrees):
                idx = np.flatnonzero(enum.degrees == d)
                O[np.ix_(idx, idx)] = _haar_orthogonal(idx.size, rng, space.is_complex)
            self.mixing = O

    @property
    def y_dim(self):
        return self.X.ambient_dim

    def psi(self, y):
        B = self.X.basis(y, self.bound)
        return B if self.mixing is None else B @ self.mixing

    def _diag(self, op):
        op = _as_operator(op)
        return _multiplier_values(op, self.enumeration().lambdas) / self.singular_values

    def evaluate(self, ells, x, y, op=None):
        self.check_ells(ells)
        Bx = self.X.basis(x, self.bound)
        return (Bx * self._diag(op)) @ self.psi(y).conj().T

    def connection(self, ells, y):
        ells = self.check_ells(ells)
        return (self.psi(y)[:, ells] * self.singular_values[ells]).T

    def y_quadrature(self, bound):
        return self.X.quadrature(max(int(math.ceil(self.bound)), 1))

    def network_spectrum(self, ells, y, weights, op=None):
        c = (self.psi(y).conj() * self._diag(op)).T @ np.asarray(weights)
        return SpectralFunction(self.X, c, self.bound, real=True)

    def sup_and_lipschitz(self, n, op=None, rng=None, samples=16):
        rng = np.random.default_rng(0) if rng is None else rng
        x = self.X.sup_grid(self.bound)
        y = self.X.random_points(samples, rng)
        G = self.evaluate(0, x, y, op)
        sup = float(np.max(np.abs(G)))
        lip = _lipschitz_by_steps(self.X, lambda xx: self.evaluate(0, xx, y, op), rng, self.alpha)
        return sup, sup + lip

    def to_config(self):
        return {
            "variant": "svd",
            "space": self.X.to_config(),
            "bound": self.bound,
            "beta": self.beta,
            "mix_seed": self.mix_seed,
        }


def _tangent_step(space, x, h, rng):
    """Points at geodesic distance ``h`` from ``x`` in random directions."""
    if space.is_torus:
        d = rng.standard_normal(x.shape)
        d /= np.linalg.norm(d, axis=-1, keepdims=True)
        return np.mod(x + h * d, TWO_PI)
    d = rng.standard_normal(x.shape)
    d -= np.sum(d * x, axis=-1, keepdims=True) * x
    d /= np.linalg.norm(d, axis=-1, keepdims=True)
    return np.cos(h) * x + np.sin(h) * d


def _lipschitz_by_steps(space, func, rng, alpha, count=256, steps=(1e-3, 1e-2, 1e-1, 0.5)):
    x = space.random_points(count, rng)
    fx = func(x)
    best = 0.0
    for h in steps:
        x2 = _tangent_step(space, x, h, rng)
        rho = space.distance(x, x2)
        q = np.abs(func(x2) - fx) / (rho[:, None] ** alpha)
        best = max(best, float(np.max(q)))
    return best


def _holder_1d(theta, values, alpha):
    """Max of ``|g(s) - g(t)| / |s - t|**alpha`` over grid pairs at geometric separations."""
    best = 0.0
    m = len(theta)
    h = theta[1] - theta[0]
    for step in np.unique(np.geomspace(1, m - 1, 40).astype(int)):
        d = np.abs(values[step:] - values[:-step])
        best = max(best, float(np.max(d)) / (step * h) ** alpha)
    return best


# ---------------------------------------------------------------------------
# Zonal kernels: twisted zonal functions and ReLU^r
# ---------------------------------------------------------------------------


def _zonal_profile(cfg, degrees):
    j = np.asarray(degrees, dtype=float)
    kind = cfg.get("type")
    if kind == "power":
        return (1.0 + j) ** (-float(cfg["beta0"]))
    if kind == "exp_decay":
        rate = float(cfg.get("rate", cfg.get("beta0", 1.0)))
        return np.exp(-rate * j)
    if kind == "coeffs":
        vals = np.asarray(cfg["values"], dtype=float)
        out = np.zeros(j.size)
        m = min(vals.size, j.size)
        out[:m] = vals[:m]
        return out
    raise ConfigError(f"unknown zonal profile type {kind!r}")


class ZonalKernel(EignetKernel):
    """``G(x . R y) = sum_j g_hat(j) K_j(x . R y)`` on S^q with degree-``j`` projector ``K_j``.

    With ``rotations=None`` the parameter space is the sphere itself.  With a
    list of ``m`` rotations it is ``{0..m-1} x S^q`` under the uniform product
    measure; a Y point is ``(i, y)`` stored as a row of length ``q + 2``.
    ``Lambda_j = 1/g_hat(j)`` where ``g_hat(j) != 0`` and 0 otherwise.
    """

    variant = "zonal"

    def __init__(self, space, bound, ghat, rotations=None, beta=None):
        if space.is_torus:
            raise ParameterError("zonal kernels live on spheres")
        if space.q > 2:
            raise CapacityError("zonal kernels need basis evaluation, available on S^1 and S^2")
        self.X = space
        self.bound = float(bound)
        self.jmax = int(math.ceil(self.bound)) - 1
        self.ghat = np.asarray(ghat, dtype=float)[: self.jmax + 1]
        if self.ghat.size != self.jmax + 1:
            raise ParameterError("profile must give a coefficient for every degree below bound")
        tiny = 1e-300
        self.Lambda = np.where(np.abs(self.ghat) > tiny, 1.0 / np.where(self.ghat == 0, 1, self.ghat), 0.0)
        self.beta = float(beta) if beta is not None else float("nan")
        self.ultra = UltrasphericalBasis(space.q, max(self.jmax, 1) + 1)
        self.rotations = None if rotations is None else [np.asarray(R, dtype=float) for R in rotations]
        self._blocks = None
        if self.rotations is not None:
            if len(self.rotations) == 0:
                raise ParameterError("rotation list is empty")
            self._blocks = [rotation_matrix_elements(space, R, self.jmax) for R in self.rotations]

    @property
    def y_dim(self):
        return self.X.ambient_dim + (0 if self.rotations is None else 1)

    def _split_y(self, y):
        y = np.atleast_2d(np.asarray(y, dtype=float))
        if self.rotations is None:
            return np.zeros(len(y), dtype=int), self.X.check_points(y)
        idx = y[:, 0].astype(int)
        if idx.min() < 0 or idx.max() >= len(self.rotations):
            raise DomainError("rotation index out of range")
        return idx, self.X.check_points(y[:, 1:])

    def _rotated(self, y):
        idx, pts = self._split_y(y)
        if self.rotations is None:
            return pts
        out = np.empty_like(pts)
        for i, R in enumerate(self.rotations):
            sel = idx == i
            out[sel] = pts[sel] @ R.T
        return out

    def degrees(self, bound=None):
        return self.enumeration(bound).degrees

    def covered(self, bound=None):
        d = self.degrees(bound)
        if d.size and d.max() > self.jmax:
            raise CapacityError("coverage requested beyond the kernel truncation")
        return self.Lambda[d] != 0

    def profile(self, op=None):
        """Coefficients ``b(lambda_j) g_hat(j)``, ``j = 0..jmax``."""
        op = _as_operator(op)
        j = np.arange(self.jmax + 1)
        lam = np.sqrt(j * (j + self.X.q - 1.0))
        return _multiplier_values(op, lam) * self.ghat

    def profile_function(self, op=None):
        coeffs = self.profile(op)
        return lambda t: self.ultra.zonal_series(coeffs, t)

    def evaluate(self, ells, x, y, op=None):
        self.check_ells(ells)
        x = self.X.check_points(np.atleast_2d(x))
        t = np.clip(x @ self._rotated(y).T, -1.0, 1.0)
        return self.profile_function(op)(t)

    def connection(self, ells, y):
        ells = self.check_ells(ells)
        idx, pts = self._split_y(y)
        B = self.X.basis(pts, self.bound)
        lam = self.Lambda[self.degrees()]
        if self.rotations is None:
            return (B[:, ells] * lam[ells]).T
        D = np.empty((ells.size, len(pts)))
        for i, T in enumerate(self._blocks):
            sel = idx == i
            D[:, sel] = ((B[sel] * lam) @ T[:, ells]).T
        return D

    def y_quadrature(self, bound):
        d = int(math.ceil((self.jmax + 1 + math.ceil(bound)) / 2.0)) + 1
        x, w = self.X.quadrature(d)
        if self.rotations is None:
            return x, w
        m = len(self.rotations)
        idx = np.repeat(np.arange(m, dtype=float), len(x))
        return np.column_stack([idx, np.tile(x, (m, 1))]), np.tile(w, m) / m

    def network_spectrum(self, ells, y, weights, op=None):
        B = self.X.basis(self._rotated(y), self.bound)
        c = self.profile(op)[self.degrees()] * (B.T @ np.asarray(weights))
        return SpectralFunction(self.X, c, self.bound)

    def sup_and_lipschitz(self, n, op=None, rng=None, samples=16):
        theta = np.linspace(0.0, np.pi, 4097)
        g = self.profile_function(op)(np.cos(theta))
        sup = float(np.max(np.abs(g)))
        return sup, sup + _holder_1d(theta, g, self.alpha)

    def fitted_type(self):
        """Least-squares ``beta`` in ``|Lambda_j| ~ (1 + j)**beta`` over covered degrees ``j >= 1``."""
        j = np.arange(self.jmax + 1)
        ok = (self.Lambda != 0) & (j >= 1)
        if ok.sum() < 2:
            return float("nan")
        return float(np.polyfit(np.log1p(j[ok]), np.log(np.abs(self.Lambda[ok])), 1)[0])


class TwistedZonalKernel(ZonalKernel):
    variant = "twisted_zonal"

    def __init__(self, space, bound, profile, rotations=None):
        self.profile_config = dict(profile)
        jmax = int(math.ceil(float(bound))) - 1
        ghat = _zonal_profile(self.profile_config, np.arange(jmax + 1))
        beta = self.profile_config.get("beta0") if self.profile_config.get("type") == "power" else None
        super().__init__(space, bound, ghat, rotations, beta)

    def to_config(self):
        cfg = {
            "variant": "twisted_zonal",
            "space": self.X.to_config(),
            "bound": self.bound,
            "profile": self.profile_config,
        }
        if self.rotations is not None:
            cfg["rotations"] = [_axis_angle(R) for R in self.rotations]
        return cfg


def _axis_angle(R):
    if R.shape == (2, 2):
        return [float(math.atan2(R[1, 0], R[0, 0]))]
    return [float(v) for v in Rotation.from_matrix(R).as_rotvec()]


class ReLUKernel(ZonalKernel):
    """``G_r(x . y)`` on S^q: ``max(t, 0)**r`` (integer r) or ``|t|**r``.

    Pointwise values are exact.  The expansion is truncated at ``bound`` for
    the connection map, network spectra and derivative-mode evaluation.
    """

    variant = "relu"

    def __init__(self, space, bound, r, y_degree=None):
        if r <= 0:
            raise DomainError("ReLU exponent must be positive")
        self.r = float(r)
        jmax = int(math.ceil(float(bound))) - 1
        ratio = volume_ratio(space.q)
        ghat = np.array([relu_profile_coefficient(space.q, self.r, j) for j in range(jmax + 1)]) / ratio
        ghat[np.abs(ghat) < 1e-15 * np.max(np.abs(ghat))] = 0.0
        super().__init__(space, bound, ghat, None, beta=0.5 * (space.q + 2 * self.r + 1))
        self.alpha = min(1.0, self.r)
        # The activation is only C^r across x.y = 0, so a polynomial-exact rule
        # leaves a bias in the discretized measure; a finer grid keeps it small.
        self.y_degree = int(y_degree) if y_degree else min(max(64, 4 * (self.jmax + 1)), 128)

    def y_quadrature(self, bound):
        return self.X.quadrature(max(self.y_degree, int(math.ceil((self.jmax + 1 + math.ceil(bound)) / 2.0)) + 1))

    def evaluate(self, ells, x, y, op=None):
        op = _as_operator(op)
        if not op.is_identity:
            return super().evaluate(ells, x, y, op)
        self.check_ells(ells)
        x = self.X.check_points(np.atleast_2d(x))
        return relu_activation(self.r, np.clip(x @ self._rotated(y).T, -1.0, 1.0))

    def sup_and_lipschitz(self, n, op=None, rng=None, samples=16):
        op = _as_operator(op)
        if not op.is_identity:
            return super().sup_and_lipschitz(n, op, rng, samples)
        theta = np.linspace(0.0, np.pi, 4097)
        g = relu_activation(self.r, np.cos(theta))
        return 1.0, 1.0 + _holder_1d(theta, g, self.alpha)

    def connection_residuals(self, ells, xtest, nodes=None):
        """Residuals against the exact activation, using a rule adapted to the kink at ``x . y = 0``.

        For each test point the sphere is parametrized by ``t = x . y`` and an
        angle around ``x``; ``t`` is integrated by Gauss-Jacobi rules on
        ``[0, 1]`` and ``[-1, 0]`` carrying the ``|t|**r`` factor as weight.
        """
        ells = self.check_ells(ells)
        xtest = self.X.check_points(np.atleast_2d(xtest))
        q = self.X.q
        deg = self.degrees()
        top = int(deg[ells].max()) if ells.size else 0
        n = nodes or top // 2 + 8
        a = 0.5 * q - 1.0
        s, ws = roots_jacobi(n, a, self.r)
        t = 0.5 * (1.0 + s)  # int_0^1 t^r (1-t)^a h(t) dt = 2^{-(a+r+1)} sum ws h(t)
        wt = ws * 2.0 ** (-(a + self.r + 1.0)) * (1.0 + t) ** a / weight_mass(q)
        halves = [(t, wt)]
        if not is_integer_exponent(self.r):
            halves.append((-t, wt))
        m = 2 * top + 4
        phis = TWO_PI * np.arange(m) / m
        out = np.zeros(ells.size)
        lam = self.Lambda[deg[ells]]
        for x in xtest:
            e = _orthonormal_complement(x)
            acc = np.zeros(ells.size)
            for tt, ww in halves:
                st = np.sqrt(1.0 - tt * tt)
                if q == 2:
                    circ = np.cos(phis)[:, None] * e[0] + np.sin(phis)[:, None] * e[1]
                    pts = tt[:, None, None] * x + st[:, None, None] * circ[None, :, :]
                    wts = np.repeat(ww / m, m)
                else:  # q == 1: two points per t
                    pts = tt[:, None, None] * x + st[:, None, None] * np.array([e[0], -e[0]])[None]
                    wts = np.repeat(ww / 2.0, 2)
                pts = pts.reshape(-1, q + 1)
                pts /= np.linalg.norm(pts, axis=1, keepdims=True)
                B = self.X.basis(pts, self.bound)[:, ells]
                acc += wts @ B
            phi_x = self.X.basis(x[None], self.bound)[0, ells]
            out = np.maximum(out, np.abs(phi_x - lam * acc))
        return out

    def to_config(self):
        return {"variant": "relu", "space": self.X.to_config(), "bound": self.bound, "r": self.r, "y_degree": self.y_degree}


def _orthonormal_complement(x):
    """Rows spanning the orthogonal complement of the unit vector ``x``."""
    qm, _ = np.linalg.qr(np.column_stack([x, np.eye(x.size)]))
    return qm[:, 1:].T


# ---------------------------------------------------------------------------
# Generalized translation networks
# ---------------------------------------------------------------------------


def _torus_profile(cfg, q):
    """Frequencies ``m`` (rows) and Fourier coefficients of a trigonometric profile on T^q."""
    kind = cfg.get("type")
    if kind == "poisson":
        rho = float(cfg.get("rho", 0.5))
        K = int(cfg.get("order", 2))
        grid = np.stack(np.meshgrid(*([np.arange(-K, K + 1)] * q), indexing="ij"), -1).reshape(-1, q)
        return grid, rho ** np.abs(grid).sum(axis=1).astype(float) + 0j
    if kind == "coeffs":
        rows = np.asarray(cfg["terms"], dtype=float)
        if rows.ndim != 2 or rows.shape[1] not in (q + 1, q + 2):
            raise ConfigError(f"profile terms must be rows [m_1..m_{q}, re(, im)]")
        freqs = rows[:, :q].astype(int)
        vals = rows[:, q] + (1j * rows[:, q + 1] if rows.shape[1] == q + 2 else 0.0)
        return freqs, vals
    raise ConfigError(f"unknown torus profile type {kind!r}")


class GTNKernel(EignetKernel):
    """``G(A_k x - y)`` from T^Q to T^q, with ``A_k`` from :func:`gtn_matrix`.

    ``D_G phi_k(y) = exp(i 1 . y) / g_hat(1)``; the kernel is complex valued
    unless the profile is conjugate symmetric.
    """

    variant = "gtn"
    ell_independent = False
    complex_valued = True

    def __init__(self, Q, q, bound, profile):
        if not 1 <= q <= Q:
            raise ParameterError(f"need 1 <= q <= Q, got q={q}, Q={Q}")
        self.X = DataSpace.torus(Q)
        self.Y = DataSpace.torus(q)
        self.Q, self.q = int(Q), int(q)
        self.bound = float(bound)
        self.profile_config = dict(profile)
        self.freqs, self.values = _torus_profile(self.profile_config, q)
        hit = np.all(self.freqs == 1, axis=1)
        g1 = complex(self.values[hit].sum()) if hit.any() else 0j
        if abs(g1) < 1e-14:
            raise InvalidKernelError("profile coefficient at the all-ones frequency must be nonzero")
        self.g_one = g1
        self.order = int(np.max(np.abs(self.freqs))) if self.freqs.size else 0

    @property
    def y_dim(self):
        return self.q

    def lattice(self, ells):
        return self.enumeration().indices[self.check_ells(ells)]

    def profile_value(self, z):
        """``G(z) = sum_m g_hat(m) exp(i m . z)`` for points ``z`` (trailing axis q)."""
        z = np.asarray(z, dtype=float)
        return np.exp(1j * (z @ self.freqs.T)) @ self.values

    def evaluate(self, ells, x, y, op=None):
        op = _as_operator(op)
        x = self.X.check_points(np.atleast_2d(x))
        y = self.Y.check_points(np.atleast_2d(y))
        ells = self.check_ells(ells)
        if ells.size == 1:
            ells = np.full(len(y), ells[0])
        k = self.enumeration().indices[ells]
        A = gtn_matrix(k, self.q).astype(float)  # (M, q, Q)
        b = _multiplier_values(op, np.linalg.norm(k, axis=1))
        out = np.empty((len(x), len(y)), dtype=complex)
        chunk = max(1, 2_000_000 // max(1, len(y) * len(self.values)))
        for s in range(0, len(x), chunk):
            z = np.einsum("mqQ,nQ->nmq", A, x[s : s + chunk]) - y[None]
            out[s : s + chunk] = self.profile_value(z) * b
        return out

    def connection(self, ells, y):
        ells = self.check_ells(ells)
        y = self.Y.check_points(np.atleast_2d(y))
        row = np.exp(1j * y.sum(axis=1)) / self.g_one
        return np.broadcast_to(row, (ells.size, len(y))).copy()

    def y_quadrature(self, bound):
        return self.Y.quadrature(self.order + 2)

    def connection_residuals(self, ells, xtest, chunk=512):
        # G(A x - y) = sum_m g_hat(m) exp(i (A^T m) . x) exp(-i m . y), so the
        # quadrature over y can be summed once per profile term.
        ells = self.check_ells(ells)
        xtest = self.X.check_points(np.atleast_2d(xtest))
        y, w = self.y_quadrature(self.bound)
        D = self.connection(ells[:1], y)[0]
        c = self.values * (np.exp(-1j * (y @ self.freqs.T)).T @ (w * D))
        k = self.lattice(ells)
        out = np.empty(ells.size)
        for s in range(0, ells.size, chunk):
            F = self.frequencies(ells[s : s + chunk]).astype(float)  # (c, T, Q)
            recon = np.exp(1j * np.einsum("ctQ,nQ->nct", F, xtest)) @ c
            phi = np.exp(1j * (xtest @ k[s : s + chunk].T.astype(float)))
            out[s : s + chunk] = np.max(np.abs(phi - recon), axis=0)
        return out

    def frequencies(self, ells):
        """Output frequencies ``A_k^T m`` of each slice: array ``(len(ells), n_terms, Q)``."""
        A = gtn_matrix(self.lattice(ells), self.q)
        return np.einsum("mqQ,tq->mtQ", A, self.freqs)

    def network_spectrum(self, ells, y, weights, op=None):
        op = _as_operator(op)
        ells = self.check_ells(ells)
        y = self.Y.check_points(np.atleast_2d(y))
        k = self.enumeration().indices[ells]
        b = _multiplier_values(op, np.linalg.norm(k, axis=1))
        freq = self.frequencies(ells).reshape(-1, self.Q)
        amp = (np.asarray(weights) * b)[:, None] * self.values[None, :] * np.exp(-1j * (y @ self.freqs.T))
        bound = float(np.max(np.linalg.norm(freq, axis=1))) + 1.0 if freq.size else 1.0
        bound = max(bound, 1.0)
        pos = torus_positions(self.X, freq, bound)
        c = np.zeros(self.X.dimension(bound), dtype=complex)
        np.add.at(c, pos, amp.ravel())
        return SpectralFunction(self.X, c, bound, real=False)

    def sup_and_lipschitz(self, n, op=None, rng=None, samples=16):
        op = _as_operator(op)
        z, _ = self.Y.quadrature(max(4 * (self.order + 1), 16))
        g = self.profile_value(z)
        grad = np.exp(1j * (z @ self.freqs.T)) @ (1j * self.freqs * self.values[:, None])
        enum = self.X.enumeration(n)
        norms = np.linalg.norm(enum.indices, axis=1)
        b = _multiplier_values(op, norms)
        A = gtn_matrix(enum.indices, self.q).astype(float)
        opnorm = np.linalg.norm(A, ord=2, axis=(1, 2)) if len(A) else np.zeros(0)
        sup = float(np.max(np.abs(g))) * float(np.max(b, initial=1.0))
        lipg = float(np.max(np.linalg.norm(np.abs(grad), axis=1)))
        lip = lipg * float(np.max(opnorm * b, initial=0.0))
        return sup, sup + lip

    def to_config(self):
        return {"variant": "gtn", "Q": self.Q, "q": self.q, "bound": self.bound, "profile": self.profile_config}


def torus_positions(space, kvecs, bound):
    """Enumeration positions of lattice vectors (all must satisfy ``|k| < bound``)."""
    enum = space.enumeration(bound)
    R = int(math.ceil(bound)) + 1
    base = 2 * R + 1
    weights = base ** np.arange(space.q)
    keys = (enum.indices + R) @ weights
    order = np.argsort(keys)
    want = (np.asarray(kvecs, dtype=int) + R) @ weights
    at = np.searchsorted(keys[order], want)
    at = np.clip(at, 0, len(order) - 1)
    if np.any(keys[order][at] != want):
        raise CapacityError("lattice vector outside the enumeration bound")
    return order[at]


# ---------------------------------------------------------------------------
# Construction from configs and validation
# ---------------------------------------------------------------------------


def kernel_from_config(cfg):
    """Build a kernel from its JSON config (see the README for the schema)."""
    try:
        variant = cfg["variant"]
        if variant == "gtn":
            return GTNKernel(int(cfg["Q"]), int(cfg["q"]), float(cfg["bound"]), cfg.get("profile", {"type": "poisson"}))
        space = DataSpace.from_config(cfg["space"]) if "space" in cfg else DataSpace.sphere(int(cfg["q"]))
        bound = float(cfg["bound"])
        if variant == "svd":
            return SVDKernel(space, bound, float(cfg.get("beta", 0.0)), cfg.get("mix_seed"))
        if variant == "twisted_zonal":
            rots = cfg.get("rotations")
            if rots is not None:
                rots = [rotation_from_axis_angle(v) for v in rots]
            elif "random_rotations" in cfg:
                rr = cfg["random_rotations"]
                rots = random_rotations(int(rr["count"]), space.ambient_dim, np.random.default_rng(rr.get("seed", 0)))
            return TwistedZonalKernel(space, bound, cfg["profile"], rots)
        if variant == "relu":
            return ReLUKernel(space, bound, float(cfg["r"]), cfg.get("y_degree"))
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"malformed kernel config: {exc!r}") from exc
    raise ConfigError(f"unknown kernel variant {cfg.get('variant')!r}")


@dataclass
class ValidationReport:
    variant: str
    ells: np.ndarray
    degrees: np.ndarray
    residuals: np.ndarray
    covered: np.ndarray
    uncovered_degrees: list
    d_norms: np.ndarray
    beta_block: float
    beta_index: float
    sup_constants: dict
    lip_constants: dict
    tolerance: float
    truncation: float
    notes: list = field(default_factory=list)

    @property
    def max_residual(self):
        r = self.residuals[self.covered]
        return float(np.max(r)) if r.size else 0.0

    @property
    def passed(self):
        return self.max_residual < self.tolerance

    def summary(self):
        return {
            "variant": self.variant,
            "passed": self.passed,
            "tolerance": self.tolerance,
            "max_residual_covered": self.max_residual,
            "indices_checked": int(self.ells.size),
            "uncovered_degrees": self.uncovered_degrees,
            "beta_block": self.beta_block,
            "beta_index": self.beta_index,
            "G_n": {str(k): v for k, v in self.sup_constants.items()},
            "L_n": {str(k): v for k, v in self.lip_constants.items()},
            "truncation_bound": self.truncation,
            "notes": self.notes,
        }


def _fit_beta(lambdas, dn, top):
    """Block form (slope of ``log2 sqrt(max over block)`` in the level) and index form.

    Only blocks lying entirely inside the checked range ``lambda <= top`` enter
    the block fit.
    """
    amp = np.sqrt(np.maximum(dn, 1e-300))
    ok = lambdas >= 1
    beta_index = float("nan")
    if ok.sum() >= 2 and np.ptp(np.log(lambdas[ok])) > 0:
        beta_index = float(np.polyfit(np.log(lambdas[ok]), np.log(amp[ok]), 1)[0])
    levels, vals = [], []
    j = 1
    while 2.0**j <= top + 1.0:
        sel = (lambdas >= 2.0 ** (j - 2)) & (lambdas < 2.0**j)
        if sel.any():
            levels.append(j)
            vals.append(np.log2(np.max(amp[sel])))
        j += 1
    beta_block = float(np.polyfit(levels, vals, 1)[0]) if len(levels) >= 2 else float("nan")
    return beta_block, beta_index


def validate_kernel(kernel, max_lambda=8.0, tolerance=1e-6, test_points=64, levels=None, seed=0, max_indices=None):
    """Check the connection condition for every index with ``lambda <= max_lambda``.

    Failures are reported, not raised.  Also returns the fitted exponent
    ``beta`` and sup / Lipschitz constants at scales ``2**n`` for ``n`` in ``levels``.
    """
    rng = np.random.default_rng(seed)
    enum = kernel.enumeration()
    top = min(max_lambda, enum.lambdas[-1])
    ells = np.flatnonzero(enum.lambdas <= top + 1e-12)
    notes = []
    if max_indices is not None and ells.size > max_indices:
        ells = np.sort(rng.choice(ells, max_indices, replace=False))
        notes.append(f"residuals checked on {max_indices} random indices")
    xtest = kernel.X.random_points(test_points, rng)
    cov_all = kernel.covered()
    covered = cov_all[ells]
    res = np.full(ells.size, np.nan)
    if covered.any():
        res[covered] = kernel.connection_residuals(ells[covered], xtest)
    if (~covered).any():
        res[~covered] = kernel.connection_residuals(ells[~covered], xtest)
    dn = kernel.d_norms(ells[covered]) if covered.any() else np.zeros(0)
    beta_block, beta_index = _fit_beta(enum.lambdas[ells[covered]], dn, top) if dn.size else (np.nan, np.nan)
    if levels is None:
        levels = range(0, int(math.floor(math.log2(kernel.bound))) + 1)
    sups, lips = {}, {}
    for n in levels:
        s, l = kernel.sup_and_lipschitz(2.0**n, rng=rng)
        sups[int(n)], lips[int(n)] = float(s), float(l)
    full_d = np.zeros(ells.size)
    full_d[covered] = dn
    report = ValidationReport(
        variant=kernel.variant,
        ells=ells,
        degrees=enum.degrees[ells],
        residuals=res,
        covered=covered,
        uncovered_degrees=sorted(set(int(d) for d in enum.degrees[ells[~covered]])),
        d_norms=full_d,
        beta_block=beta_block,
        beta_index=beta_index,
        sup_constants=sups,
        lip_constants=lips,
        tolerance=tolerance,
        truncation=kernel.bound,
        notes=notes,
    )
    kernel.validation = report
    return report
