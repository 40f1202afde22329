"""Low-pass filter, localized kernels, filtered approximation and analysis operators.

Functions on a data space are handled through :class:`SpectralFunction`, a
coefficient vector in the enumeration order of :meth:`DataSpace.enumeration`.
"""

from dataclasses import dataclass, field
import json
import math

import numpy as np

from .dataspace import DataSpace
from .errors import CapacityError, ParameterError
from .ultraspherical import UltrasphericalBasis


def _bump(s):
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    pos = s > 0
    out[pos] = np.exp(-1.0 / s[pos])
    return out


class Filter:
    """C-infinity cutoff: 1 on [0, 1/2], 0 on [1, inf), monotone in between.

    The transition is ``g(1 - t) / (g(1 - t) + g(t - 1/2))`` with
    ``g(s) = exp(-1/s)`` for ``s > 0``.  Extended evenly to negative ``t``.
    """

    smoothness = math.inf

    def __call__(self, t):
        t = np.abs(np.asarray(t, dtype=float))
        a = _bump(1.0 - t)
        b = _bump(t - 0.5)
        den = a + b
        return np.where(t <= 0.5, 1.0, np.where(t >= 1.0, 0.0, a / np.where(den > 0, den, 1.0)))

    def __repr__(self):
        return "Filter()"


DEFAULT_FILTER = Filter()


def eval_filter(filt, t):
    if np.any(np.asarray(t) < 0):
        raise ParameterError("filter argument must be nonnegative")
    return filt(t)


@dataclass
class SpectralFunction:
    """Coefficients ``f_hat(k)`` for all ``k`` with ``lambda_k < bound``.

    On the torus the coefficients are complex (``phi_k = exp(i k . x)``); a real
    function has ``f_hat(-k) = conj(f_hat(k))`` and :meth:`evaluate` returns the
    real part unless ``real=False``.
    """

    space: DataSpace
    coeffs: np.ndarray
    bound: float
    real: bool = True
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs)
        n = self.space.dimension(self.bound)
        if self.coeffs.shape != (n,):
            raise ParameterError(f"expected {n} coefficients for bound {self.bound}, got {self.coeffs.shape}")

    @classmethod
    def zeros(cls, space, bound, dtype=None):
        dtype = dtype or (complex if space.is_complex else float)
        return cls(space, np.zeros(space.dimension(bound), dtype=dtype), bound)

    @classmethod
    def constant(cls, space, value, bound=1.0):
        f = cls.zeros(space, bound)
        f.coeffs[0] = value
        return f

    @classmethod
    def from_samples(cls, space, func, bound, degree=None):
        """Project ``func`` onto ``Pi_bound`` by quadrature of the given degree."""
        degree = space.quadrature_degree if degree is None else degree
        if degree < 2 * bound:
            raise CapacityError(
                f"projection onto Pi_{bound} from samples needs quadrature degree >= {2 * bound}"
            )
        x, w = space.quadrature(degree)
        vals = np.asarray(func(x))
        B = space.basis(x, bound)
        c = B.conj().T @ (w * vals)
        if not space.is_complex:
            c = c.real
        return cls(space, c, bound)

    @property
    def lambdas(self):
        return self.space.lambdas(self.bound)

    def resized(self, bound):
        n = self.space.dimension(bound)
        out = np.zeros(n, dtype=self.coeffs.dtype)
        m = min(n, self.coeffs.size)
        if bound < self.bound and np.any(self.coeffs[m:] != 0):
            raise CapacityError("truncation would drop nonzero coefficients; use project()")
        out[:m] = self.coeffs[:m]
        return SpectralFunction(self.space, out, bound, self.real)

    def project(self, bound):
        """Plain truncation to ``lambda_k < bound`` (not the filtered operator)."""
        n = self.space.dimension(bound)
        out = np.zeros(n, dtype=self.coeffs.dtype)
        m = min(n, self.coeffs.size)
        out[:m] = self.coeffs[:m]
        return SpectralFunction(self.space, out, bound, self.real)

    def _binary(self, other, op):
        bound = max(self.bound, other.bound)
        a, b = self.resized(bound), other.resized(bound)
        return SpectralFunction(self.space, op(a.coeffs, b.coeffs), bound, self.real and other.real)

    def __add__(self, other):
        return self._binary(other, np.add)

    def __sub__(self, other):
        return self._binary(other, np.subtract)

    def __mul__(self, c):
        return SpectralFunction(self.space, self.coeffs * c, self.bound, self.real)

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    def active_bound(self):
        """Largest ``lambda_k`` with a nonzero coefficient (0 for the zero function)."""
        nz = np.flatnonzero(np.abs(self.coeffs) > 0)
        if nz.size == 0:
            return 0.0
        return float(self.lambdas[nz[-1]])

    def evaluate(self, x, chunk=4096):
        x = self.space.check_points(x)
        lead = x.shape[:-1]
        flat = x.reshape(-1, self.space.ambient_dim)
        out = np.empty(len(flat), dtype=complex if self.space.is_complex else float)
        for s in range(0, len(flat), chunk):
            out[s : s + chunk] = self.space.basis(flat[s : s + chunk], self.bound) @ self.coeffs
        if self.space.is_complex and self.real:
            out = out.real
        return out.reshape(lead)

    __call__ = evaluate

    def norm2(self):
        return float(np.sqrt(np.sum(np.abs(self.coeffs) ** 2)))

    def norm(self, p):
        if p == 2:
            return self.norm2()
        if p in (math.inf, "inf"):
            if self.space.is_torus:
                return float(np.max(np.abs(self.grid_values())))
            grid = self.space.sup_grid(max(self.bound, 1.0))
            return float(np.max(np.abs(self.evaluate(grid))))
        raise ParameterError(f"unsupported norm index {p!r}; use 2 or inf")

    def grid_values(self, per_axis=None):
        """Values on the uniform torus grid with ``per_axis`` points per axis, by inverse FFT.

        The default oversamples the highest frequency by a factor of two.
        """
        if not self.space.is_torus:
            raise ParameterError("grid_values is defined on the torus only")
        k = self.space.enumeration(self.bound).indices
        r = int(np.max(np.abs(k))) if k.size else 0
        N = per_axis or max(4 * r, 4)
        if N <= 2 * r:
            raise CapacityError(f"{N} points per axis alias frequency {r}")
        grid = np.zeros((N,) * self.space.q, dtype=complex)
        np.add.at(grid, tuple((k % N).T), self.coeffs)
        vals = np.fft.ifftn(grid) * N**self.space.q
        return vals.real if self.real else vals

    def to_json(self):
        c = self.coeffs.astype(complex)
        return {
            "space": self.space.to_config(),
            "bound": self.bound,
            "real": self.real,
            "coeffs": [[int(k), float(v.real), float(v.imag)] for k, v in enumerate(c) if v != 0],
        }

    def dumps(self):
        return json.dumps(self.to_json())

    @classmethod
    def from_json(cls, obj):
        if isinstance(obj, str):
            obj = json.loads(obj)
        space = DataSpace.from_config(obj["space"])
        f = cls.zeros(space, obj["bound"])
        for k, re, im in obj["coeffs"]:
            f.coeffs[int(k)] = complex(re, im) if space.is_complex else re
        f.real = obj.get("real", True)
        return f


def _as_spectral(space, f, bound):
    if isinstance(f, SpectralFunction):
        return f
    return SpectralFunction.from_samples(space, f, bound)


# -- kernels and operators ---------------------------------------------------


def kernel_phi(space, filt, n, x, y):
    """Localized kernel ``sum_k H(lambda_k / n) phi_k(x) conj(phi_k(y))``."""
    if n < 1:
        raise ParameterError("scale n must be >= 1")
    h = filt(space.lambdas(n) / n)
    bx = space.basis(x, n)
    by = space.basis(y, n)
    val = np.sum(bx * h * by.conj(), axis=-1)
    return val.real if space.is_complex else val


def zonal_phi(q, filt, n, t):
    """Localized kernel on S^q as a function of ``t = x . y`` (any q)."""
    jmax = 0
    while np.sqrt((jmax + 1) * (jmax + q)) < n:
        jmax += 1
    j = np.arange(jmax + 1)
    coeffs = filt(np.sqrt(j * (j + q - 1.0)) / n)
    return UltrasphericalBasis(q, max(jmax, 1)).zonal_series(coeffs, t)


def localization_slope(q, filt, n, num=4000):
    """Fitted log-log slope of ``|Phi_n|`` on S^q against ``log(n * rho)``, ``rho`` in ``[4/n, pi/2]``.

    The kernel oscillates, so the fit uses its local maxima (one per lobe) on
    a uniform grid of ``num`` points; this is independent of how densely each
    lobe is sampled.
    """
    rho = np.linspace(4.0 / n, np.pi / 2, num)
    vals = np.abs(zonal_phi(q, filt, n, np.cos(rho)))
    inner = (vals[1:-1] >= vals[:-2]) & (vals[1:-1] >= vals[2:])
    peaks = np.flatnonzero(inner) + 1
    peaks = np.concatenate(([0], peaks)) if vals[0] >= vals[1] else peaks
    if peaks.size < 3:
        peaks = np.arange(num)
    slope, _ = np.polyfit(np.log(n * rho[peaks]), np.log(vals[peaks]), 1)
    return float(slope)


def sigma(space, filt, n, f):
    """Filtered approximation ``sum H(lambda_k / n) f_hat(k) phi_k``, an element of ``Pi_n``."""
    if n <= 0:
        raise ParameterError("scale must be positive")
    f = _as_spectral(space, f, n)
    g = f.project(n)
    g.coeffs = g.coeffs * filt(g.lambdas / n)
    return g


def tau(space, filt, j, f):
    """Analysis operator at level ``j``: ``sigma_1`` for j = 0, else ``sigma_{2^j} - sigma_{2^{j-1}}``."""
    if j < 0:
        raise ParameterError("level must be nonnegative")
    f = _as_spectral(space, f, 2.0**j)
    if j == 0:
        return sigma(space, filt, 1.0, f)
    return sigma(space, filt, 2.0**j, f) - sigma(space, filt, 2.0 ** (j - 1), f)


def tau_norms(space, filt, f, levels):
    """``||tau_j(f)||_2`` for ``j`` in ``levels`` straight from the coefficients."""
    lam = f.lambdas
    a2 = np.abs(f.coeffs) ** 2
    out = []
    for j in levels:
        w = filt(lam) if j == 0 else filt(lam / 2.0**j) - filt(lam / 2.0 ** (j - 1))
        out.append(float(np.sqrt(np.sum(w * w * a2))))
    return np.array(out)


def degree_of_approx(space, filt, f, n, p=2):
    """``||f - sigma_n(f)||_p``, the computable proxy for the degree of approximation."""
    if p not in (2, math.inf, "inf"):
        raise ParameterError(f"unsupported norm index {p!r}; use 2 or inf")
    if isinstance(f, SpectralFunction):
        r = f - sigma(space, filt, n, f)
        return r.norm(p)
    s = sigma(space, filt, n, f)
    if p == 2:
        x, w = space.quadrature()
        d = np.asarray(f(x)) - s.evaluate(x)
        return float(np.sqrt(np.sum(w * np.abs(d) ** 2)))
    x = space.sup_grid(max(n, space.quadrature_degree))
    return float(np.max(np.abs(np.asarray(f(x)) - s.evaluate(x))))


@dataclass
class SobolevNorm:
    sup_form: float
    series_form: float | None
    levels: int


def default_levels(f):
    """Deepest level whose analysis operator can be nonzero for ``f``."""
    b = max(f.active_bound(), 1.0)
    return int(math.floor(math.log2(b))) + 2


def sobolev_norm(space, filt, f, gamma, p=2, levels=None):
    """``||f||_p + max_{1<=j<=J} 2^{j gamma} ||tau_j f||_p`` and, for p = 2,
    ``sqrt(||f||^2 + sum_{0<=j<=J} 4^{j gamma} ||tau_j f||^2)``."""
    J = default_levels(f) if levels is None else int(levels)
    if p == 2:
        t = tau_norms(space, filt, f, range(J + 1))
        base = f.norm2()
        sup_form = base + (float(np.max(2.0 ** (gamma * np.arange(1, J + 1)) * t[1:])) if J >= 1 else 0.0)
        series = math.sqrt(base**2 + float(np.sum(4.0 ** (gamma * np.arange(J + 1)) * t**2)))
        return SobolevNorm(sup_form, series, J)
    norms = [tau(space, filt, j, f).norm(p) for j in range(1, J + 1)]
    sup_form = f.norm(p) + max((2.0 ** (gamma * j) * v for j, v in zip(range(1, J + 1), norms)), default=0.0)
    return SobolevNorm(sup_form, None, J)


# -- pseudo-differential operators ------------------------------------------------


@dataclass(frozen=True)
class Multiplier:
    """Spectral multiplier ``b(lambda) = lambda**a`` (``a = 0`` is the identity).

    ``exponent`` is the derivative-like order used by the rate formulas.
    """

    a: float = 0.0
    name: str = "identity"

    @classmethod
    def identity(cls):
        return cls(0.0, "identity")

    @classmethod
    def power(cls, a):
        return cls(float(a), f"power({a:g})")

    @classmethod
    def from_config(cls, cfg):
        if cfg is None:
            return cls.identity()
        kind = cfg.get("type", "identity")
        if kind == "identity":
            return cls.identity()
        if kind == "power":
            return cls.power(cfg["a"])
        raise ParameterError(f"unknown operator type {kind!r}")

    def to_config(self):
        if self.is_identity:
            return {"type": "identity"}
        return {"type": "power", "a": self.a}

    @property
    def is_identity(self):
        return self.a == 0.0

    @property
    def exponent(self):
        return self.a

    def __call__(self, lam):
        lam = np.asarray(lam, dtype=float)
        if self.is_identity:
            return np.ones_like(lam)
        with np.errstate(divide="ignore"):
            return np.where(lam > 0, lam**self.a, 0.0 if self.a > 0 else np.inf)


def apply_pseudo_differential(bspec, f):
    """Coefficientwise ``b(lambda_k) * f_hat(k)``; ``bspec`` is a callable of lambda."""
    b = np.asarray(bspec(f.lambdas), dtype=float)
    if not np.all(np.isfinite(b[np.abs(f.coeffs) > 0])):
        raise ParameterError("multiplier is not finite on the active spectrum")
    b = np.where(np.isfinite(b), b, 0.0)
    return SpectralFunction(f.space, f.coeffs * b, f.bound, f.real)
