import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bandshift import Lattice, bz_grid, dual_basis, reduce_to_bz
from bandshift.errors import DegenerateLatticeError, ValidationError

TWO_PI = 2.0 * np.pi


def test_dual_1d_biorthogonal():
    dual = dual_basis(Lattice([[TWO_PI]]))
    assert dual.basis[0, 0] == pytest.approx(1.0, abs=1e-14)


def test_dual_square_lattice():
    dual = dual_basis(Lattice([[1.0, 0.0], [0.0, 1.0]]))
    np.testing.assert_allclose(dual.basis, TWO_PI * np.eye(2), atol=1e-12)


def test_dual_hexagonal_matches_linear_solve():
    # oracle: solve <e_i, e*_j> = 2 pi delta_ij directly as a linear system
    basis = np.array([[1.0, 0.5], [0.0, np.sqrt(3.0) / 2.0]])  # columns e1, e2
    lat = Lattice(basis)
    expected = np.linalg.solve(basis.T, TWO_PI * np.eye(2))
    dual = dual_basis(lat)
    np.testing.assert_allclose(dual.basis, expected, atol=1e-12)
    np.testing.assert_allclose(basis.T @ dual.basis, TWO_PI * np.eye(2), atol=1e-12)


def test_dual_volume_identity():
    lat = Lattice([[1.0, 0.3], [0.1, 2.0]])
    dual = dual_basis(lat)
    assert dual.cell_volume == pytest.approx(TWO_PI**2 / lat.cell_volume, rel=1e-12)


def test_double_dual_recovers_lattice():
    basis = np.array([[1.0, 0.5], [0.0, np.sqrt(3.0) / 2.0]])
    dual = dual_basis(Lattice(basis))
    again = dual_basis(Lattice(dual.basis))
    np.testing.assert_allclose(again.basis, basis, atol=1e-10)


def test_singular_basis_rejected():
    with pytest.raises(DegenerateLatticeError):
        Lattice([[1.0, 2.0], [2.0, 4.0]])


def test_reduce_examples():
    dual = dual_basis(Lattice([[TWO_PI]]))  # dual = Z
    assert reduce_to_bz(np.array([1.3]), dual)[0] == pytest.approx(0.3, abs=1e-12)
    assert reduce_to_bz(np.array([0.3]), dual)[0] == pytest.approx(0.3, abs=1e-12)
    assert reduce_to_bz(dual.basis[:, 0], dual)[0] == pytest.approx(0.0, abs=1e-12)


def test_reduce_half_open_edges():
    dual = dual_basis(Lattice([[TWO_PI]]))
    assert reduce_to_bz(np.array([-0.5]), dual)[0] == pytest.approx(-0.5)
    assert reduce_to_bz(np.array([0.5]), dual)[0] == pytest.approx(-0.5)


@given(st.floats(-50.0, 50.0), st.integers(-5, 5))
@settings(max_examples=80, deadline=None)
def test_reduce_idempotent_and_equivariant(k, shift):
    dual = dual_basis(Lattice([[TWO_PI]]))
    r1 = reduce_to_bz(np.array([k]), dual)
    r2 = reduce_to_bz(r1, dual)
    np.testing.assert_allclose(r1, r2, atol=1e-9)
    r3 = reduce_to_bz(np.array([k + shift * dual.basis[0, 0]]), dual)
    np.testing.assert_allclose(r1, r3, atol=1e-9)


@given(
    st.floats(-5.0, 5.0), st.floats(-5.0, 5.0),
    st.floats(-5.0, 5.0), st.floats(-5.0, 5.0),
    st.floats(-20.0, 20.0), st.floats(-20.0, 20.0),
)
@settings(max_examples=60, deadline=None)
def test_reduce_2d_random_bases(a, b, c, d, kx, ky):
    basis = np.array([[a, b], [c, d]])
    if abs(np.linalg.det(basis)) < 0.3:
        return
    dual = dual_basis(Lattice(basis))
    k = np.array([kx, ky])
    red = reduce_to_bz(k, dual)
    coords = np.linalg.solve(dual.basis, red)
    assert np.all(coords >= -0.5 - 1e-9) and np.all(coords < 0.5 + 1e-9)
    # reduced point is congruent to k mod the dual lattice
    m = np.linalg.solve(dual.basis, k - red)
    np.testing.assert_allclose(m, np.round(m), atol=1e-7)


def test_grid_weight_sum_all_resolutions(dual_2pi):
    for res in range(1, 65):
        grid = bz_grid(dual_2pi, res)
        assert grid.weights.sum() == pytest.approx(dual_2pi.cell_volume, rel=1e-10)
        assert len(grid.points) == res


def test_grid_examples(dual_2pi):
    grid = bz_grid(dual_2pi, 4)
    np.testing.assert_allclose(grid.weights, 0.25)
    assert grid.weights.sum() == pytest.approx(1.0)

    single = bz_grid(dual_2pi, 1)
    np.testing.assert_allclose(single.points, [[0.0]], atol=1e-15)
    assert single.weights[0] == pytest.approx(dual_2pi.cell_volume)

    dual2 = dual_basis(Lattice(np.eye(2)))
    grid2 = bz_grid(dual2, 8)
    assert len(grid2.points) == 64
    assert grid2.weights.sum() == pytest.approx(TWO_PI**2, rel=1e-10)


def test_grid_points_reduce_to_themselves(dual_2pi):
    grid = bz_grid(dual_2pi, 9)
    red = reduce_to_bz(grid.points, dual_2pi)
    np.testing.assert_allclose(red, grid.points, atol=1e-12)


def test_grid_rejects_bad_resolution(dual_2pi):
    with pytest.raises(ValidationError):
        bz_grid(dual_2pi, 0)
