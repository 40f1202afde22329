"""Discretized kernel measures, sampled networks and the rate bookkeeping around them.

The pipeline for a target ``f`` is

1. ``P = sigma_{2^n}(f)``, a polynomial in ``Pi_{2^n}``;
2. :func:`build_nu` turns ``P`` into a signed measure on (index, Y-node) pairs
   whose kernel integral reproduces ``P``;
3. :func:`sample_network` draws ``M`` atoms from ``|nu| / |nu|_TV`` and keeps
   their signs, giving a network with ``M`` terms and common scale ``|nu|_TV / M``.

:func:`synthesize` chains the three and picks ``n`` from ``M``.
"""

from dataclasses import dataclass, field
from functools import lru_cache
import json
import math
import warnings

import numpy as np

from .errors import (
    CapacityError,
    CompatibilityError,
    CoverageError,
    DegenerateInputError,
    ParameterError,
    PreconditionError,
)
from .filtered_ops import DEFAULT_FILTER, Multiplier, SpectralFunction, sigma
from .kernels import EignetKernel, ReLUKernel, kernel_from_config, torus_positions
from .ultraspherical import UltrasphericalBasis, volume_ratio

# ---------------------------------------------------------------------------
# Rate bookkeeping
# ---------------------------------------------------------------------------

BELOW, BOUNDARY, ABOVE = "below", "boundary", "above"


def regime(gamma, beta, q, tol=1e-12):
    """Where ``gamma`` sits relative to ``q/2 + beta``."""
    c = 0.5 * q + beta
    if abs(gamma - c) <= tol:
        return BOUNDARY
    return BELOW if gamma < c else ABOVE


def t_n(gamma, beta, q, n):
    """Total-variation envelope: ``2^{n(q/2+beta-gamma)}``, ``n`` or 1 by regime."""
    if n < 0:
        raise ParameterError("level must be nonnegative")
    reg = regime(gamma, beta, q)
    if reg == BELOW:
        return 2.0 ** (n * (0.5 * q + beta - gamma))
    if reg == BOUNDARY:
        return float(n)
    return 1.0


def hoeffding_bound(M, t, range_width):
    """``2 exp(-2 M t^2 / width^2)``: tail of a mean of ``M`` variables with range ``width``."""
    if t <= 0 or range_width <= 0:
        raise ParameterError("t and range_width must be positive")
    return 2.0 * math.exp(-2.0 * M * t * t / (range_width * range_width))


def union_envelope(M, t, range_width, net_size):
    """Hoeffding bound times the number of points the supremum is taken over."""
    return net_size * hoeffding_bound(M, t, range_width)


@dataclass
class RateSpec:
    """Smoothness ``gamma``, dimension ``q``, kernel type ``beta``, growth exponents ``A``, ``B``
    and the operator exponents ``a_k``."""

    gamma: float
    q: int
    beta: float = 0.0
    A: float = 0.0
    B: float = 0.0
    a: list = field(default_factory=lambda: [0.0])

    @property
    def a_lo(self):
        return min(self.a)

    @property
    def a_hi(self):
        return max(self.a)

    def check(self):
        if self.gamma < max(0.0, self.a_hi):
            raise PreconditionError(
                f"smoothness {self.gamma} must be at least max(0, largest operator exponent {self.a_hi})"
            )

    @property
    def regime(self):
        return regime(self.gamma, self.beta, self.q)


@dataclass(frozen=True)
class Rate:
    """Predicted error ``~ x(M)^{-exponent}`` with ``x(M) = M / (log M)^log_power``."""

    exponent: float
    log_power: float
    regime: str

    def abscissa(self, M):
        M = np.asarray(M, dtype=float)
        return M / np.log(M) ** self.log_power

    def predicted(self, M):
        return self.abscissa(M) ** (-self.exponent)


def predicted_rate(spec, a_k=None, family="general", r=None):
    """Exponent and abscissa of the error bound for one operator.

    ``family``: ``"general"`` uses the stated ``A``; ``"svd"`` and ``"zonal"`` use
    ``A = 0``; ``"gtn"`` uses ``beta = 0`` and ``A = a^*``; ``"relu"`` uses the
    ReLU^r bound with exponent ``(r - a_k)/q``.
    """
    a_k = spec.a_lo if a_k is None else a_k
    g, q, lo = spec.gamma, spec.q, spec.a_lo
    if family == "relu":
        if r is None:
            raise ParameterError("the ReLU rate needs r")
        e = (r - a_k) / q
        # r < (q + 2r + 1)/2 always holds, so only the first case occurs
        return Rate(e, 1.0 / (2.0 * e), BELOW)
    if family in ("svd", "zonal"):
        A, beta = 0.0, spec.beta
    elif family == "gtn":
        A, beta = spec.a_hi, 0.0
    elif family == "general":
        A, beta = spec.A, spec.beta
    else:
        raise ParameterError(f"unknown family {family!r}")
    reg = regime(g, beta, q)
    if reg == BELOW:
        return Rate((g - a_k) / (q + 2 * beta + 2 * A - 2 * lo), 1.0, reg)
    e = (g - a_k) / (2 * A + 2 * g - 2 * lo)
    return Rate(e, 3.0 if reg == BOUNDARY else 1.0, reg)


def family_of(kernel):
    return {"svd": "svd", "twisted_zonal": "zonal", "zonal": "zonal", "gtn": "gtn", "relu": "relu"}[kernel.variant]


# ---------------------------------------------------------------------------
# Measures
# ---------------------------------------------------------------------------


@dataclass
class AtomMeasure:
    """Signed masses on ``(ells[a], y[i])`` pairs: ``masses[a, i] = P_hat(ell) D_G phi_ell(y_i) w_i``."""

    kernel: EignetKernel
    ells: np.ndarray
    y: np.ndarray
    masses: np.ndarray
    level: float

    @property
    def size(self):
        return self.masses.size

    def atom(self, flat):
        a, i = np.divmod(np.asarray(flat), self.masses.shape[1])
        return self.ells[a], self.y[i]

    @property
    def tv(self):
        return float(np.sum(np.abs(self.masses)))

    def kernel_integral(self, x, op=None):
        """``sum mass * [U]G(ell; x, y)`` over all atoms (the infinite-network limit)."""
        if self.masses.size == 0:
            return np.zeros(len(np.atleast_2d(x)))
        if self.kernel.ell_independent:
            w = self.masses.sum(axis=0)
            vals = self.kernel.evaluate(0, x, self.y, op) @ w
        else:
            vals = np.zeros(len(np.atleast_2d(x)), dtype=complex)
            for a, ell in enumerate(self.ells):
                vals += self.kernel.evaluate(np.full(len(self.y), ell), x, self.y, op) @ self.masses[a]
        return _realify(vals)


def _realify(v):
    return v.real if np.iscomplexobj(v) else v


def tv_norm(nu):
    """Total variation ``sum |mass|`` of a discretized measure."""
    tv = nu.tv if isinstance(nu, AtomMeasure) else float(np.sum(np.abs(np.asarray(nu))))
    if tv == 0:
        raise DegenerateInputError("the zero measure has no total-variation normalization")
    return tv


def build_nu(P, kernel, require_validated=True):
    """Discretize ``dnu(ell, y) = P_hat(ell) D_G phi_ell(y) dmu_Y(y)`` on the kernel's Y-quadrature."""
    if require_validated and getattr(kernel, "validation", None) is None:
        raise PreconditionError("kernel has not been validated (run validate_kernel first)")
    if P.space != kernel.X:
        raise ParameterError("polynomial and kernel live on different spaces")
    active = P.active_bound()
    if active >= kernel.bound:
        raise CapacityError(f"polynomial reaches lambda {active:g}, not below the kernel bound {kernel.bound:g}")
    bound = active + 1.0
    coeffs = P.project(kernel.bound).coeffs
    nz = np.flatnonzero(np.abs(coeffs) > 0)
    bad = nz[~kernel.covered()[nz]]
    if bad.size:
        degs = sorted(set(int(d) for d in kernel.enumeration().degrees[bad]))
        raise CoverageError(f"target has content on degrees the kernel cannot reproduce: {degs}", degs)
    y, w = kernel.y_quadrature(bound)
    if nz.size == 0:
        return AtomMeasure(kernel, nz, y, np.zeros((0, len(y))), bound)
    D = kernel.connection(nz, y)
    masses = coeffs[nz][:, None] * D * w[None, :]
    if not np.iscomplexobj(coeffs) and not np.iscomplexobj(D):
        masses = masses.real
    return AtomMeasure(kernel, nz, y, masses, bound)


# ---------------------------------------------------------------------------
# Networks
# ---------------------------------------------------------------------------


@dataclass
class Network:
    """``scale * sum_j w_j G(ell_j; x, y_j)`` with unit-modulus ``w_j``."""

    kernel: EignetKernel
    scale: float
    ells: np.ndarray
    y: np.ndarray
    weights: np.ndarray
    provenance: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.ells)

    def _grouped(self):
        """Merge atoms sharing ``(ell, y)`` (or just ``y`` for ``ell``-independent kernels)."""
        if len(self.ells) == 0:
            return self.ells, self.y, self.weights
        key = self.y if self.kernel.ell_independent else np.column_stack([self.ells, self.y])
        uniq, inv = np.unique(key, axis=0, return_inverse=True)
        inv = inv.ravel()
        w = np.zeros(len(uniq), dtype=self.weights.dtype)
        np.add.at(w, inv, self.weights)
        if self.kernel.ell_independent:
            return np.zeros(len(uniq), dtype=int), uniq, w
        return uniq[:, 0].astype(int), uniq[:, 1:], w

    def evaluate(self, x, op=None, chunk=2048):
        op = self.kernel.check_operator(op)
        x = np.atleast_2d(x)
        ells, y, w = self._grouped()
        out = np.zeros(len(x))
        if len(w) == 0:
            return out
        for s in range(0, len(x), chunk):
            G = self.kernel.evaluate(ells if not self.kernel.ell_independent else 0, x[s : s + chunk], y, op)
            out[s : s + chunk] = _realify(G @ w) * self.scale
        return out

    def spectrum(self, op=None):
        """X-coefficients of the (real part of the) network, truncated at the kernel bound for series kernels."""
        op = self.kernel.check_operator(op)
        ells, y, w = self._grouped()
        if len(w) == 0:
            return SpectralFunction.zeros(self.kernel.X, 1.0)
        f = self.kernel.network_spectrum(ells, y, self.scale * w, op)
        return real_part(f) if self.kernel.X.is_complex else f

    def to_json(self):
        def enc(v):
            return [float(v.real), float(v.imag)] if np.iscomplexobj(v) else float(v)

        return {
            "kernel": self.kernel.to_config(),
            "scale": self.scale,
            "atoms": [
                {"l": int(e), "y": [float(t) for t in yy], "w": enc(ww)}
                for e, yy, ww in zip(self.ells, self.y, self.weights)
            ],
            "provenance": self.provenance,
        }

    def dumps(self):
        return json.dumps(self.to_json())

    @classmethod
    def from_json(cls, obj, kernel=None):
        if isinstance(obj, str):
            obj = json.loads(obj)
        kernel = kernel or kernel_from_config(obj["kernel"])
        atoms = obj["atoms"]
        ells = np.array([a["l"] for a in atoms], dtype=int)
        y = np.array([a["y"] for a in atoms], dtype=float).reshape(len(atoms), kernel.y_dim)
        ws = [a["w"] for a in atoms]
        if any(isinstance(v, list) for v in ws):
            weights = np.array([complex(*v) if isinstance(v, list) else v for v in ws])
        else:
            weights = np.array(ws, dtype=float)
        return cls(kernel, float(obj["scale"]), ells, y, weights, obj.get("provenance", {}))


def real_part(f):
    """Spectral coefficients of ``Re f`` for a torus function given by complex coefficients."""
    if not f.space.is_torus:
        return SpectralFunction(f.space, f.coeffs.real, f.bound)
    enum = f.space.enumeration(f.bound)
    neg = torus_positions(f.space, -enum.indices, f.bound)
    c = 0.5 * (f.coeffs + np.conj(f.coeffs[neg]))
    return SpectralFunction(f.space, c, f.bound, real=True)


def zero_network(kernel, provenance=None):
    return Network(kernel, 0.0, np.zeros(0, dtype=int), np.zeros((0, kernel.y_dim)), np.zeros(0), provenance or {})


def sample_network(nu, M, seed):
    """Draw ``M`` atoms i.i.d. with probability ``|mass| / tv`` (inverse CDF, ties to the lower index)."""
    if M < 1 or int(M) != M:
        raise ParameterError("M must be a positive integer")
    M = int(M)
    tv = tv_norm(nu)
    absm = np.abs(nu.masses).ravel()
    cdf = np.cumsum(absm)
    rng = np.random.default_rng(seed)
    u = rng.random(M) * cdf[-1]
    flat = np.minimum(np.searchsorted(cdf, u, side="right"), absm.size - 1)
    m = nu.masses.ravel()[flat]
    w = m / np.abs(m)
    ells, y = nu.atom(flat)
    return Network(nu.kernel, tv / M, ells, y, w, {"M": M, "seed": seed, "tv": tv})


# ---------------------------------------------------------------------------
# Errors
# ---------------------------------------------------------------------------


@lru_cache(maxsize=16)
def _zonal_tail_table(q, ghat_tail, start, num=20001):
    """``H(t) = sum_{j >= start} g_hat(j)^2 K_j(t)`` on a uniform grid of ``t``."""
    coeffs = np.zeros(start + len(ghat_tail))
    coeffs[start:] = np.asarray(ghat_tail) ** 2
    t = np.linspace(-1.0, 1.0, num)
    basis = UltrasphericalBasis(q, coeffs.size)
    return t, basis.zonal_series(coeffs, t)


@lru_cache(maxsize=16)
def _relu_tail_coeffs(q, r, start, extra_degrees):
    from .kernels import relu_profile_coefficient

    return tuple(relu_profile_coefficient(q, r, j) / volume_ratio(q) for j in range(start, start + extra_degrees))


def relu_tail_energy(net, extra_degrees=4000):
    """``||net - truncated net||_2^2`` for a ReLU^r network: energy above the kernel truncation."""
    k = net.kernel
    _, y, w = net._grouped()
    if len(w) == 0:
        return 0.0
    start = k.jmax + 1
    t, H = _zonal_tail_table(k.X.q, _relu_tail_coeffs(k.X.q, k.r, start, extra_degrees), start)
    step = (len(t) - 1) / 2.0
    c = net.scale * w
    total = 0.0
    for s in range(0, len(y), 1024):
        # linear interpolation on the uniform table
        pos = (np.clip(y[s : s + 1024] @ y.T, -1.0, 1.0) + 1.0) * step
        i = np.minimum(pos.astype(np.intp), len(t) - 2)
        frac = pos - i
        vals = H[i] * (1.0 - frac) + H[i + 1] * frac
        total += float(c[s : s + 1024] @ vals @ c)
    return max(total, 0.0)


def l2_error(f, net, op=None):
    """``||U f - U net||_2`` computed from spectral coefficients (Parseval).

    For ReLU^r networks under the identity, the energy of the activation
    above the kernel truncation is added exactly.
    """
    op = net.kernel.check_operator(op)
    Uf = _apply(op, f)
    diff = Uf - net.spectrum(op)
    e2 = diff.norm2() ** 2
    if isinstance(net.kernel, ReLUKernel) and op.is_identity:
        e2 += relu_tail_energy(net)
    return math.sqrt(e2)


def sup_error(f, net, points, op=None):
    op = net.kernel.check_operator(op)
    return float(np.max(np.abs(_apply(op, f).evaluate(points) - net.evaluate(points, op))))


def _apply(op, f):
    if op.is_identity:
        return f
    b = np.asarray(op(f.lambdas), dtype=float)
    if not np.all(np.isfinite(b[np.abs(f.coeffs) > 0])):
        raise CompatibilityError(f"{op.name} is not finite on the target spectrum")
    return SpectralFunction(f.space, f.coeffs * np.where(np.isfinite(b), b, 0.0), f.bound, f.real)


# ---------------------------------------------------------------------------
# The recipe
# ---------------------------------------------------------------------------


@dataclass
class Diagnostics:
    n: int
    regime: str
    T_n: float
    tv: float
    M: int
    seed: int
    atoms_in_measure: int
    sigma_errors: dict
    predicted: dict
    constants: dict
    warnings: list = field(default_factory=list)

    def to_json(self):
        return dict(self.__dict__)


def _as_ops(operators):
    ops = list(operators) if operators else [Multiplier.identity()]
    out = []
    for op in ops:
        if isinstance(op, dict):
            op = Multiplier.from_config(op)
        if not isinstance(op, Multiplier):
            raise CompatibilityError(f"operator {op!r} is not a spectral multiplier")
        out.append(op)
    return out


def max_level(kernel):
    return int(math.floor(math.log2(kernel.bound) + 1e-12))


def m_required(spec, n, G, L, c1=1.0, c2=1.0):
    """Right side of the sample-size condition at level ``n``."""
    T = t_n(spec.gamma, spec.beta, spec.q, n)
    T_eff = max(T, 1.0)
    d = spec.gamma - spec.a_lo
    return c1 * 2.0 ** (2 * n * d) * (G * T_eff) ** 2 * (c2 + n * d + math.log(max(L * T_eff, 1.0 + 1e-12)))


def choose_level(spec, kernel, M, ops, c1=1.0, c2=1.0, nmax=None, step=1.0):
    """Largest ``n`` whose sample-size condition holds for ``M`` (0 if none does).

    ``step < 1`` searches a finer grid of real levels (scale ``2**n``).
    """
    nmax = max_level(kernel) if nmax is None else min(nmax, max_level(kernel))
    best, consts = 0, {}
    for n in np.arange(0.0, nmax + 1e-9, step):
        n = int(n) if float(n).is_integer() else float(n)
        G, L = 0.0, 0.0
        for op in ops:
            g, l = kernel.sup_and_lipschitz(2.0**n, op)
            G, L = max(G, g), max(L, l)
        consts[n] = {"G_n": G, "L_n": L, "M_required": m_required(spec, n, G, L, c1, c2)}
        if M >= consts[n]["M_required"]:
            best = n
    return best, consts


def synthesize(f, kernel, spec, M, operators=None, seed=0, n=None, c1=1.0, c2=1.0, filt=DEFAULT_FILTER):
    """Build a network of ``M`` atoms approximating ``f``; returns ``(network, diagnostics)``."""
    spec.check()
    ops = _as_ops(operators)
    for op in ops:
        kernel.check_operator(op)
    consts = {}
    if n is None:
        n, consts = choose_level(spec, kernel, M, ops, c1, c2)
    elif n > max_level(kernel):
        raise CapacityError(f"level {n} needs kernel bound >= {2 ** n}")
    P = sigma(f.space, filt, 2.0**n, f)
    fam = family_of(kernel)
    reg = regime(spec.gamma, spec.beta, spec.q)
    sig = {op.name: (_apply(op, f) - _apply(op, P)).norm2() for op in ops}
    pred = {}
    for op in ops:
        rate = predicted_rate(spec, op.exponent, fam, getattr(kernel, "r", None))
        pred[op.name] = {"exponent": rate.exponent, "log_power": rate.log_power, "value": float(rate.predicted(max(M, 2)))}
    notes = []
    nu = build_nu(P, kernel)
    if nu.tv == 0:
        warnings.warn("target filtered to zero; returning the zero network", RuntimeWarning)
        notes.append("zero target")
        net = zero_network(kernel, {"M": M, "seed": seed, "n": n})
        tv = 0.0
    else:
        net = sample_network(nu, M, seed)
        tv = nu.tv
    net.provenance.update({"n": n, "gamma": spec.gamma, "regime": reg, "T_n": t_n(spec.gamma, spec.beta, spec.q, n)})
    diag = Diagnostics(
        n=n,
        regime=reg,
        T_n=t_n(spec.gamma, spec.beta, spec.q, n),
        tv=tv,
        M=M,
        seed=seed,
        atoms_in_measure=nu.size,
        sigma_errors=sig,
        predicted=pred,
        constants={str(k): v for k, v in consts.items()},
        warnings=notes,
    )
    return net, diag


def full_network(nu):
    """Every atom of ``nu`` with its exact mass: the un-sampled network."""
    a, i = np.divmod(np.arange(nu.size), nu.masses.shape[1])
    m = nu.masses.ravel()
    keep = m != 0
    return Network(nu.kernel, 1.0, nu.ells[a[keep]], nu.y[i[keep]], m[keep], {"full": True})


def eval_network(net, x, operator=None):
    return net.evaluate(x, operator)
