import numpy as np
import pytest

from eignet.dataspace import DataSpace, harmonic_dimension
from eignet.errors import CapacityError, DomainError, ParameterError


@pytest.fixture(params=["torus1", "torus2", "sphere1", "sphere2"])
def space(request):
    kind, q = request.param[:-1], int(request.param[-1])
    return getattr(DataSpace, kind)(q)


def test_quadrature_makes_basis_orthonormal(space):
    x, w = space.quadrature(9)
    assert np.isclose(w.sum(), 1.0) and np.all(w > 0)
    B = space.basis(x, 9)
    gram = B.conj().T @ (w[:, None] * B)
    assert np.allclose(gram, np.eye(B.shape[1]), atol=1e-12)


def test_enumeration_is_sorted_with_prefix_property(space):
    big, small = space.enumeration(12), space.enumeration(6)
    assert np.all(np.diff(big.lambdas) >= 0)
    assert np.array_equal(big.lambdas[: len(small)], small.lambdas)
    assert big.count_below(6) == len(small)
    with pytest.raises(CapacityError):
        small.count_below(7)


def test_sphere_eigenvalues_and_dimensions():
    enum = DataSpace.sphere(2).enumeration(10)
    lam = np.unique(enum.lambdas)
    j = np.arange(lam.size)
    assert np.allclose(lam, np.sqrt(j * (j + 1)))
    assert [harmonic_dimension(d, 2) for d in range(4)] == [1, 3, 5, 7]
    counts = np.bincount(enum.degrees)
    assert np.array_equal(counts, 2 * j + 1)


def test_torus_eigenvalues_are_lattice_norms():
    enum = DataSpace.torus(2).enumeration(3)
    assert np.allclose(enum.lambdas, np.linalg.norm(enum.indices, axis=1))
    # |k|^2 in {0, 1, 2, 4, 5, 8}: 1 + 4 + 4 + 4 + 8 + 4 lattice points
    assert len(enum) == 25


def test_dyadic_blocks_cover_the_spectrum_with_overlap():
    enum = DataSpace.sphere(2).enumeration(32)
    seen = np.concatenate([enum.dyadic_block(j) for j in range(6)])
    assert np.array_equal(np.unique(seen), np.arange(len(enum)))
    lam = enum.lambdas[enum.dyadic_block(4)]
    assert lam.min() >= 4 and lam.max() < 16


def test_distance_and_point_checks():
    s2 = DataSpace.sphere(2)
    e = np.eye(3)
    assert np.isclose(s2.distance(e[0], e[1]), np.pi / 2)
    with pytest.raises(DomainError):
        s2.check_points(np.array([[1.0, 1.0, 0.0]]))
    t1 = DataSpace.torus(1)
    assert np.isclose(t1.distance(np.array([0.1]), np.array([2 * np.pi - 0.1])), 0.2)


def test_epsilon_net_covers_candidates():
    s2 = DataSpace.sphere(2)
    cand = s2.random_points(3000, np.random.default_rng(0))
    net = s2.epsilon_net(0.3, cand)
    d = s2.distance(cand[:, None, :], net[None, :, :])
    assert d.min(axis=1).max() <= 0.3 + 1e-12
    # net points are eps-separated
    dn = s2.distance(net[:, None, :], net[None, :, :]) + 10 * np.eye(len(net))
    assert dn.min() > 0.3


def test_invalid_spaces_rejected():
    with pytest.raises(ParameterError):
        DataSpace("cube", 2)
    with pytest.raises(ParameterError):
        DataSpace.sphere(0)
    with pytest.raises(CapacityError):
        DataSpace.sphere(3).basis(np.eye(4)[:1], 3)
