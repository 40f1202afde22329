"""The torus T^q and the sphere S^q as concrete data spaces.

Each space carries a geodesic metric, a probability measure realized through a
positive quadrature rule, an orthonormal system enumerated in order of
nondecreasing ``lambda_k``, and greedy epsilon-nets.

Point conventions
-----------------
* torus: arrays of shape ``(..., q)`` with coordinates in ``[0, 2*pi)``; the
  orthonormal system is ``exp(i k . x)`` for ``k`` in ``Z^q`` and is complex.
  Real functions are stored with conjugate-symmetric coefficients and their
  values are reported as the real part.
* sphere: unit vectors of shape ``(..., q + 1)``.  The real orthonormal system
  is implemented for ``q`` in {1, 2}; zonal-only code paths accept larger ``q``.
"""

from dataclasses import dataclass
from functools import cached_property, lru_cache
import math

import numpy as np

from .errors import CapacityError, DomainError, ParameterError

TWO_PI = 2.0 * np.pi
MAX_QUADRATURE_DEGREE = 512
UNIT_TOL = 1e-10


def harmonic_dimension(j, q):
    """Dimension ``d_j^q`` of the degree-``j`` spherical harmonics on S^q."""
    if j < 0:
        return 0
    if j == 0:
        return 1
    return math.comb(j + q, q) - math.comb(j + q - 2, q)


@dataclass(frozen=True)
class SpectralEnumeration:
    """Eigen-index table for ``lambda_k < bound``, sorted by ``lambda_k``.

    ``indices`` holds the lattice vector ``k`` (torus) or ``(degree, slot)``
    pairs (sphere); ``degrees`` is the sphere degree ``j`` or, on the torus,
    ``|k|_2**2``, so equal degree means equal eigenvalue.
    """

    lambdas: np.ndarray
    degrees: np.ndarray
    indices: np.ndarray
    bound: float

    def __len__(self):
        return len(self.lambdas)

    def count_below(self, n):
        """``|S*_n|``, the number of indices with ``lambda_k < n``."""
        if n > self.bound:
            raise CapacityError(f"enumeration built for lambda < {self.bound}, asked {n}")
        return int(np.searchsorted(self.lambdas, n, side="left"))

    def level_set(self, ell):
        """``S_ell``: positions with ``lambda_k == ell`` (to 1e-12)."""
        return np.flatnonzero(np.abs(self.lambdas - ell) < 1e-12)

    def below(self, n):
        return np.arange(self.count_below(n))

    def dyadic_block(self, j):
        """Positions of the block where the j-th analysis operator lives.

        ``{k : 2**(j-2) <= lambda_k < 2**j}`` for ``j >= 1`` and ``{k : lambda_k < 1}``
        for ``j = 0``.
        """
        if j < 0:
            raise ParameterError("block level must be nonnegative")
        hi = 2.0**j
        if hi > self.bound:
            raise CapacityError(f"block {j} exceeds enumeration bound {self.bound}")
        lo = 0.0 if j == 0 else 2.0 ** (j - 2)
        return np.flatnonzero((self.lambdas >= lo) & (self.lambdas < hi))


@dataclass(frozen=True)
class DataSpace:
    kind: str
    q: int
    quadrature_degree: int = 32

    def __post_init__(self):
        if self.kind not in ("torus", "sphere"):
            raise ParameterError(f"unknown space kind {self.kind!r}")
        if self.q < 1:
            raise ParameterError("dimension q must be >= 1")
        if not 1 <= self.quadrature_degree <= MAX_QUADRATURE_DEGREE:
            raise CapacityError(f"quadrature_degree must lie in [1, {MAX_QUADRATURE_DEGREE}]")

    # -- construction / serialization ------------------------------------

    @classmethod
    def torus(cls, q, quadrature_degree=32):
        return cls("torus", q, quadrature_degree)

    @classmethod
    def sphere(cls, q, quadrature_degree=32):
        return cls("sphere", q, quadrature_degree)

    @classmethod
    def from_config(cls, cfg):
        return cls(str(cfg["kind"]), int(cfg["q"]), int(cfg.get("quadrature_degree", 32)))

    def to_config(self):
        return {"kind": self.kind, "q": self.q, "quadrature_degree": self.quadrature_degree}

    def with_degree(self, quadrature_degree):
        return DataSpace(self.kind, self.q, quadrature_degree)

    # -- geometry ----------------------------------------------------------

    @property
    def is_torus(self):
        return self.kind == "torus"

    @property
    def ambient_dim(self):
        return self.q if self.is_torus else self.q + 1

    @property
    def is_complex(self):
        return self.is_torus

    @property
    def diameter(self):
        return np.pi * np.sqrt(self.q) if self.is_torus else np.pi

    def check_points(self, x):
        x = np.asarray(x, dtype=float)
        if x.ndim == 0 or x.shape[-1] != self.ambient_dim:
            if self.is_torus and self.q == 1 and (x.ndim == 0 or x.shape[-1] != 1):
                x = x[..., None]
            else:
                raise DomainError(f"points must have trailing dimension {self.ambient_dim}")
        if self.is_torus:
            return np.mod(x, TWO_PI)
        norms = np.linalg.norm(x, axis=-1)
        if norms.size and np.max(np.abs(norms - 1.0)) > UNIT_TOL:
            raise DomainError("sphere points must be unit vectors (tolerance 1e-10)")
        return x

    def distance(self, x, y):
        """Geodesic distance, broadcasting over leading axes."""
        x = self.check_points(x)
        y = self.check_points(y)
        if self.is_torus:
            d = np.abs(x - y) % TWO_PI
            d = np.minimum(d, TWO_PI - d)
            return np.sqrt(np.sum(d * d, axis=-1))
        chord = np.linalg.norm(x - y, axis=-1)
        return 2.0 * np.arcsin(np.clip(0.5 * chord, 0.0, 1.0))

    def random_points(self, n, rng):
        if self.is_torus:
            return rng.uniform(0.0, TWO_PI, size=(n, self.q))
        x = rng.standard_normal((n, self.q + 1))
        return x / np.linalg.norm(x, axis=1, keepdims=True)

    # -- quadrature ------------------------------------------------------

    def quadrature(self, degree=None):
        """Nodes and positive weights (summing to 1) of a rule exact for
        ``phi_k * conj(phi_m)`` whenever ``lambda_k, lambda_m < degree``."""
        degree = self.quadrature_degree if degree is None else int(degree)
        if degree < 1:
            raise ParameterError("quadrature degree must be >= 1")
        if degree > MAX_QUADRATURE_DEGREE:
            raise CapacityError(f"quadrature degree {degree} > {MAX_QUADRATURE_DEGREE}")
        return _quadrature(self.kind, self.q, degree)

    def sup_grid(self, n):
        """Evaluation grid used for sup norms of elements of ``Pi_n``."""
        return self.quadrature(min(max(2 * int(np.ceil(n)), 8), MAX_QUADRATURE_DEGREE))[0]

    # -- spectrum --------------------------------------------------------

    def enumeration(self, bound):
        """Enumeration of all ``k`` with ``lambda_k < bound``."""
        return _enumeration(self.kind, self.q, float(bound))

    def lambdas(self, n):
        return self.enumeration(n).lambdas

    def dimension(self, n):
        """``|S*_n|``."""
        return len(self.enumeration(n))

    def basis(self, x, n):
        """Matrix ``B[i, k] = phi_k(x_i)`` for all ``lambda_k < n``.

        Complex on the torus, real on the sphere.
        """
        x = self.check_points(x)
        enum = self.enumeration(n)
        lead = x.shape[:-1]
        flat = x.reshape(-1, self.ambient_dim)
        if self.is_torus:
            out = _torus_basis(flat, enum)
        elif self.q == 1:
            out = _circle_basis(flat, enum)
        elif self.q == 2:
            out = _sphere2_basis(flat, enum)
        else:
            raise CapacityError("full basis evaluation is implemented for S^1 and S^2 only")
        return out.reshape(lead + (len(enum),))

    def eval_basis(self, k, x):
        """Value of the ``k``-th orthonormal function (enumeration order) at ``x``."""
        if k < 0:
            raise CapacityError(f"basis index {k} out of range")
        bound = 1.0
        while self.dimension(bound) <= k:
            bound *= 2.0
            if bound > 4 * MAX_QUADRATURE_DEGREE:
                raise CapacityError(f"basis index {k} out of range")
        return self.basis(x, bound)[..., k]

    def block_of(self, n):
        """Degree labels for ``lambda_k < n`` (groups with equal eigenvalue)."""
        return self.enumeration(n).degrees

    # -- nets ------------------------------------------------------------

    def epsilon_net(self, eps, candidates=None):
        """Greedy farthest-point epsilon-net over ``candidates`` (default: quadrature nodes).

        The result is epsilon-separated and every candidate lies within
        ``eps`` of it.  Deterministic given candidate order (starts at index 0).
        """
        if eps <= 0:
            raise ParameterError("eps must be positive")
        pts = self.quadrature()[0] if candidates is None else self.check_points(candidates)
        if eps >= self.diameter:
            return pts[:1].copy()
        chosen = [0]
        dmin = self.distance(pts, pts[0])
        while True:
            i = int(np.argmax(dmin))
            if dmin[i] < eps:
                break
            chosen.append(i)
            dmin = np.minimum(dmin, self.distance(pts, pts[i]))
        return pts[np.array(chosen)]


@lru_cache(maxsize=64)
def _quadrature(kind, q, degree):
    if kind == "torus":
        m = 2 * degree
        g = np.arange(m) * (TWO_PI / m)
        mesh = np.meshgrid(*([g] * q), indexing="ij")
        nodes = np.stack([a.ravel() for a in mesh], axis=-1)
        w = np.full(len(nodes), 1.0 / len(nodes))
    elif q == 1:
        m = 2 * degree
        th = np.arange(m) * (TWO_PI / m)
        nodes = np.stack([np.cos(th), np.sin(th)], axis=-1)
        w = np.full(m, 1.0 / m)
    elif q == 2:
        z, wz = np.polynomial.legendre.leggauss(degree)
        m = 2 * degree
        ph = np.arange(m) * (TWO_PI / m)
        zz, pp = np.meshgrid(z, ph, indexing="ij")
        s = np.sqrt(1.0 - zz * zz)
        nodes = np.stack([s * np.cos(pp), s * np.sin(pp), zz], axis=-1).reshape(-1, 3)
        w = (np.repeat(wz, m) / 2.0) / m
    else:
        raise CapacityError("quadrature on S^q is implemented for q in {1, 2}")
    nodes.setflags(write=False)
    w.setflags(write=False)
    return nodes, w


@lru_cache(maxsize=64)
def _enumeration(kind, q, bound):
    if kind == "torus":
        r = int(np.ceil(bound))
        axes = [np.arange(-r, r + 1)] * q
        mesh = np.meshgrid(*axes, indexing="ij")
        k = np.stack([a.ravel() for a in mesh], axis=-1)
        sq = np.sum(k * k, axis=1)
        keep = np.sqrt(sq) < bound
        k, sq = k[keep], sq[keep]
        order = np.lexsort(tuple(k[:, i] for i in reversed(range(q))) + (sq,))
        k, sq = k[order], sq[order]
        lam = np.sqrt(sq.astype(float))
        deg = sq
        idx = k
    else:
        jmax = 0
        while np.sqrt((jmax + 1) * (jmax + q)) < bound:
            jmax += 1
        if bound <= 0:
            jmax = -1
        rows = []
        for j in range(jmax + 1):
            d = harmonic_dimension(j, q)
            if q == 2:
                rows.extend((j, m) for m in range(-j, j + 1))
            else:
                rows.extend((j, s) for s in range(d))
        idx = np.array(rows, dtype=int).reshape(-1, 2)
        deg = idx[:, 0]
        lam = np.sqrt(deg * (deg + q - 1.0))
    for a in (lam, deg, idx):
        a.setflags(write=False)
    return SpectralEnumeration(lam, deg, idx, bound)


def _torus_basis(x, enum):
    # products of per-axis tables exp(i m x_d), m = -r..r
    k = enum.indices
    if k.size == 0:
        return np.zeros((len(x), 0), dtype=complex)
    r = int(np.max(np.abs(k)))
    m = np.arange(-r, r + 1)
    out = None
    for d in range(k.shape[1]):
        table = np.exp(1j * np.outer(x[:, d], m))
        col = table[:, k[:, d] + r]
        out = col if out is None else out * col
    return out


def _circle_basis(x, enum):
    th = np.arctan2(x[:, 1], x[:, 0])
    j = enum.indices[:, 0]
    s = enum.indices[:, 1]
    ang = np.outer(th, j)
    out = np.where(s == 0, np.cos(ang), np.sin(ang)) * np.where(j == 0, 1.0, np.sqrt(2.0))
    return out


def normalized_legendre(z, jmax):
    """Table ``P[j][m]`` of ``sqrt((2j+1)(j-m)!/(j+m)!) P_j^m(z)`` for 0 <= m <= j <= jmax."""
    z = np.asarray(z, dtype=float)
    s = np.sqrt(np.clip(1.0 - z * z, 0.0, None))
    table = {}
    pmm = np.ones_like(z)
    for m in range(jmax + 1):
        if m > 0:
            pmm = np.sqrt((2.0 * m + 1.0) / (2.0 * m)) * s * pmm
        table[(m, m)] = pmm
        if m + 1 <= jmax:
            table[(m + 1, m)] = np.sqrt(2.0 * m + 3.0) * z * pmm
        for j in range(m + 2, jmax + 1):
            a = np.sqrt((4.0 * j * j - 1.0) / (j * j - m * m))
            b = np.sqrt(((j - 1.0) ** 2 - m * m) / (4.0 * (j - 1.0) ** 2 - 1.0))
            table[(j, m)] = a * (z * table[(j - 1, m)] - b * table[(j - 2, m)])
    return table


def _sphere2_basis(x, enum):
    jmax = int(enum.degrees[-1]) if len(enum) else -1
    out = np.empty((len(x), len(enum)))
    if jmax < 0:
        return out
    z = np.clip(x[:, 2], -1.0, 1.0)
    ph = np.arctan2(x[:, 1], x[:, 0])
    table = normalized_legendre(z, jmax)
    trig = {0: np.ones_like(ph)}
    for m in range(1, jmax + 1):
        trig[m] = np.sqrt(2.0) * np.cos(m * ph)
        trig[-m] = np.sqrt(2.0) * np.sin(m * ph)
    for col, (j, m) in enumerate(enum.indices):
        out[:, col] = table[(j, abs(m))] * trig[m]
    return out


def geodesic_distance(space, x, y):
    return space.distance(x, y)


def quadrature_rule(space, degree):
    return space.quadrature(degree)


def eval_basis(space, k, x):
    return space.eval_basis(k, x)


def build_epsilon_net(space, eps):
    return space.epsilon_net(eps)
