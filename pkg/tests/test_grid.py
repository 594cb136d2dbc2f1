import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from contactlimit.grid import (GridError, build_grid, extend_grid, gauss_legendre, grid_from_edges,
                               integrate, nystrom_matrix)


def test_gauss_legendre_integrates_degree_2n_minus_1():
    x, w = gauss_legendre(8)
    assert np.sum(w * x**15) == pytest.approx(0.0, abs=1e-15)
    assert np.sum(w * x**14) == pytest.approx(2 / 15, rel=1e-14)


def test_build_grid_panels_and_breakpoints():
    g = build_grid([1.0], 2.0, points_per_segment=32, order=16)
    assert g.size == 64
    assert 1.0 in g.edges.tolist()
    assert g.r_max == 2.0
    assert np.all(np.diff(g.nodes) > 0)


@pytest.mark.parametrize("bad", [dict(breakpoints=[2.5], r_max=2.0), dict(breakpoints=[], r_max=-1.0),
                                 dict(breakpoints=[0.5, 0.2], r_max=1.0)])
def test_build_grid_rejects_bad_input(bad):
    with pytest.raises(GridError):
        build_grid(**bad)


def test_build_grid_rejects_too_few_points():
    with pytest.raises(GridError):
        build_grid([], 1.0, points_per_segment=2)


def test_integrate_polynomial_exact():
    g = build_grid([0.3, 1.1], 2.0)
    assert integrate(g, g.nodes**5) == pytest.approx(2.0**6 / 6, rel=1e-14)


def test_integrate_length_mismatch():
    g = build_grid([], 1.0)
    with pytest.raises(GridError):
        integrate(g, np.ones(g.size + 1))


def test_refine_doubles_panels_and_keeps_edges():
    g = build_grid([0.5], 1.0)
    f = g.refine()
    assert f.n_panels == 2 * g.n_panels
    assert set(g.edges.tolist()) <= set(f.edges.tolist())


def test_extend_grid_keeps_inner_prefix():
    g = build_grid([0.5], 1.0)
    o = extend_grid(g, 10.0, 0.5)
    assert np.array_equal(o.nodes[: g.size], g.nodes)
    assert o.r_max == 10.0
    assert o.prefix(1.0) == g.size


def test_basis_roundtrip():
    g = build_grid([], 1.0)
    v = np.cos(g.nodes)
    assert np.allclose(g.from_basis(g.to_basis(v)), v, rtol=0, atol=1e-15)
    # Euclidean norm in the basis is the L2 norm
    assert np.linalg.norm(g.to_basis(v)) ** 2 == pytest.approx(0.5 + math.sin(2) / 4, rel=1e-13)


def test_nystrom_kink_kernel_exact_on_row_inside_panel():
    # int_0^1 min(x, s) ds = x - x^2/2; the kink sits inside the column panel
    g = grid_from_edges([0.0, 1.0], order=16)
    x = np.array([0.1234, 0.5, 0.987])
    A = nystrom_matrix(x, g, np.minimum)
    assert np.allclose(A @ np.ones(g.size), x - x**2 / 2, rtol=0, atol=1e-15)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.01, 0.99), st.integers(0, 6))
def test_nystrom_min_kernel_against_polynomials(x, p):
    g = grid_from_edges([0.0, 0.5, 1.0], order=16)
    A = nystrom_matrix(np.array([x]), g, np.minimum)
    # int_0^1 min(x, s) s^p ds
    exact = x ** (p + 2) / (p + 2) + x * (1 - x ** (p + 1)) / (p + 1)
    assert (A @ g.nodes**p)[0] == pytest.approx(exact, rel=1e-13, abs=1e-15)
