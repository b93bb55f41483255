import numpy as np
import pytest

from todaflow.cocycle import transfer_matrix
from todaflow.errors import UnsupportedBoundaryError
from todaflow.hierarchy import HierarchyPolynomial
from todaflow.lattice import JacobiWindow
from todaflow.weyl import (
    INFINITY,
    HalfPlanePoint,
    check_m_evolution,
    flip_conjugate,
    free_m,
    free_m_pair,
    free_w,
    m_functions,
    m_sweep,
    mobius,
    weyl_solution,
)

GRID = [complex(x, y) for x in np.linspace(-4.0, 4.0, 10) for y in np.linspace(0.05, 4.0, 10)]


def bump_window(sites):
    b = np.zeros(sites)
    b[sites // 2] = 0.5
    return JacobiWindow(np.ones(sites), b, "eventually_free")


def test_free_m_at_2i():
    assert free_m(2j) == pytest.approx((np.sqrt(2.0) - 1.0) * 1j, abs=1e-14)


def test_free_m_is_herglotz_on_grid():
    for z in GRID:
        assert abs(free_w(z)) < 1.0
        pair = free_m_pair(z)
        assert pair.m_plus.imag > 0.0 and pair.m_minus.imag > 0.0


def test_half_plane_point_rejects_real_axis():
    with pytest.raises(ValueError):
        HalfPlanePoint(1.0)
    with pytest.raises(ValueError):
        HalfPlanePoint(1.0 - 0.5j)
    assert HalfPlanePoint(2j).z == 2j


def test_free_window_m_functions_are_closed_form():
    J = JacobiWindow.free(12, "eventually_free")
    for z in (2j, 1.0 + 0.5j, -3.0 + 1.0j):
        expected = free_m_pair(z)
        for n in (0, 5, 11):
            pair = m_functions(J, n, z)
            assert pair.m_plus == pytest.approx(expected.m_plus, abs=1e-12)
            assert pair.m_minus == pytest.approx(expected.m_minus, abs=1e-12)


def test_m_functions_are_herglotz(rng):
    for _ in range(5):
        J = JacobiWindow.random(10, rng, "eventually_free")
        for z in (3j, 2.0 + 0.5j, -1.0 + 0.5j, 0.3 + 2.0j):
            assert m_functions(J, 4, z).herglotz


def test_m_functions_need_free_tails(periodic8):
    with pytest.raises(UnsupportedBoundaryError):
        m_functions(periodic8, 0, 2j)


def test_weyl_solution_solves_the_recursion(free_window):
    z = 0.4 + 1.2j
    N = free_window.sites
    a, b = free_window.coefficients(-1, N + 2)
    for sign in (1, -1):
        u = weyl_solution(free_window, z, sign, -1, N + 2)
        for k in range(0, N + 1):
            i = k + 1
            lhs = a[i - 1] * u[i - 1] + b[i] * u[i] + a[i] * u[i + 1]
            assert lhs == pytest.approx(z * u[i], abs=1e-10)


def test_m_functions_match_weyl_solutions(free_window):
    z = -0.7 + 0.9j
    n = 14
    a_n = free_window.a[n]
    plus = weyl_solution(free_window, z, 1, n, n + 2)
    minus = weyl_solution(free_window, z, -1, n, n + 2)
    pair = m_functions(free_window, n, z)
    assert pair.m_plus == pytest.approx(-plus[1] / (a_n * plus[0]), rel=1e-10)
    assert pair.m_minus == pytest.approx(minus[1] / (a_n * minus[0]), rel=1e-10)


def test_transfer_matrix_steps_the_weyl_solution(free_window):
    z = 1.1 + 0.6j
    u = weyl_solution(free_window, z, 1, 10, 16)  # sites 10..15
    for n in range(11, 15):
        k = n - 10
        before = np.array([-u[k], free_window.a[n - 1] * u[k - 1]])
        after = np.array([-u[k + 1], free_window.a[n] * u[k]])
        stepped = transfer_matrix(free_window, n, z).matrix @ before
        assert np.allclose(stepped, after, atol=1e-12)


def test_mobius_basics():
    assert mobius(np.eye(2), 0.3 + 0.2j) == 0.3 + 0.2j
    flip = np.array([[0.0, 1.0], [-1.0, 0.0]])
    assert mobius(flip, 0.0) is INFINITY
    assert mobius(flip, INFINITY) == 0.0
    assert mobius(np.eye(2), INFINITY) is INFINITY


def test_mobius_composition(rng):
    for _ in range(25):
        first = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
        second = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
        first /= np.sqrt(np.linalg.det(first))
        second /= np.sqrt(np.linalg.det(second))
        w = complex(rng.normal(), rng.normal())
        assert mobius(first @ second, w) == pytest.approx(mobius(first, mobius(second, w)), rel=1e-9)


def test_flip_conjugate():
    matrix = np.array([[1.0, 2.0], [3.0, 4.0]])
    assert np.array_equal(flip_conjugate(matrix), [[1.0, -2.0], [-3.0, 4.0]])


def test_m_evolution_at_time_zero():
    report = check_m_evolution(bump_window(32), HierarchyPolynomial((1.0,)), 0.0, 3j)
    assert report.res_plus == 0.0 and report.res_minus == 0.0


def test_m_evolution_free_operator_fixed_points():
    J = JacobiWindow.free(24, "eventually_free")
    for z in (3j, 1.0 + 1.0j):
        report = check_m_evolution(J, HierarchyPolynomial((0.5, 1.0)), 0.5, z)
        # m_+ attracts under the flow; m_- repels, so rounding in T grows along it
        assert report.res_plus < 1e-10
        assert report.res_minus < 1e-8


def test_m_evolution_bump():
    narrow = check_m_evolution(bump_window(64), HierarchyPolynomial((1.0,)), 0.5, 3j, site=32)
    assert narrow.res_plus < 1e-4 and narrow.res_minus < 1e-4
    assert narrow.herglotz
    assert narrow.tail_deviation < 1e-8
    wide = check_m_evolution(bump_window(128), HierarchyPolynomial((1.0,)), 0.5, 3j, site=64)
    assert wide.max <= narrow.max + 1e-9


def test_m_sweep_free_rows():
    J = JacobiWindow.free(16, "eventually_free")
    rows = m_sweep(J, HierarchyPolynomial((1.0,)), [2j, 1.0 + 1.0j], [0.0, 0.2])
    assert len(rows) == 8
    for row in rows:
        pair = free_m_pair(row.z)
        expected = pair.m_plus if row.branch == "plus" else pair.m_minus
        assert row.m == pytest.approx(expected, abs=1e-12)
        assert row.m.imag > 0.0
