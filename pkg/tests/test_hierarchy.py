import logging

import numpy as np
import pytest

from todaflow.errors import FlowBreakdownError, PowerCapError
from todaflow.hierarchy import (
    FlowState,
    HierarchyPolynomial,
    build_P,
    convergence_check,
    evolve,
    group_action_check,
    iter_flow,
    lax_rhs,
    required_buffer,
    skew_part,
    spectral_drift,
    support_margin,
    tail_deviation,
    trace_invariants,
)
from todaflow.integrator import plan_steps
from todaflow.lattice import JacobiWindow, shift_left, spectrum

POLYNOMIALS = [(1.0,), (0.5, 1.0), (0.2, -0.4, 0.8), (0.1, 0.3, -0.2, 0.6)]


def test_polynomial_validation():
    with pytest.raises(ValueError):
        HierarchyPolynomial(())
    with pytest.raises(ValueError):
        HierarchyPolynomial((1.0, 0.0))
    with pytest.raises(ValueError):
        HierarchyPolynomial((float("nan"),))
    poly = HierarchyPolynomial.from_sequence([0.2, -0.4, 0.8])
    assert poly.degree == 3
    assert poly.p(1) == 0.2 and poly.p(4) == 0.0
    assert list(poly.lax_weights()) == [0.8, -0.4, 0.2]
    assert poly.reversed().to_list() == [0.8, -0.4, 0.2]


def test_plan_steps():
    assert plan_steps(0.5, 1e-3) == (500, 0.001)
    assert plan_steps(0.0, 1e-3) == (0, 0.0)
    steps, h = plan_steps(-0.25, 1e-3)
    assert steps == 250 and h < 0
    with pytest.raises(ValueError):
        plan_steps(1.0, 0.0)


def test_skew_part_of_jacobi_operator(periodic8):
    P0 = skew_part(periodic8, 0)
    window = P0.window()
    assert np.allclose(window, -window.T)
    for n in range(7):
        assert P0.entry(n, n + 1) == periodic8.a[n]
        assert P0.entry(n + 1, n) == -periodic8.a[n]
    with pytest.raises(PowerCapError):
        skew_part(periodic8, 16)


def test_skew_part_of_free_square():
    # free J^2 has 2 on the diagonal, 0 next to it and 1 on the second off-diagonals
    P1 = skew_part(JacobiWindow.free(8, "eventually_free"), 1)
    for n in range(6):
        assert P1.entry(n, n + 2) == 1.0 and P1.entry(n + 2, n) == -1.0
        assert P1.entry(n, n + 1) == 0.0 and P1.entry(n, n) == 0.0


def test_degree_one_P_is_the_skew_part_of_J(periodic8):
    P = build_P(periodic8, HierarchyPolynomial((1.0,)))
    assert np.allclose(P.matrix, skew_part(periodic8, 0).matrix, atol=0.0)


def test_build_P_band(periodic8):
    P = build_P(periodic8, HierarchyPolynomial((0.2, -0.4, 0.8)))
    assert P.half_bandwidth == 3
    matrix = P.matrix
    rows, cols = np.indices(matrix.shape)
    assert np.all(matrix[np.abs(rows - cols) > 3] == 0.0)
    assert np.allclose(P.folded(), -P.folded().T)


def test_toda_lattice_closed_form(periodic8):
    da, db = lax_rhs(periodic8, HierarchyPolynomial((1.0,)))
    a, b = periodic8.a, periodic8.b
    assert np.allclose(da, a * (np.roll(b, -1) - b), atol=1e-14)
    assert np.allclose(db, 2.0 * (a ** 2 - np.roll(a, 1) ** 2), atol=1e-14)


@pytest.mark.parametrize("coeffs", POLYNOMIALS)
def test_lax_rhs_matches_ring_oracle(rng, oracle, coeffs):
    for _ in range(10):
        J = JacobiWindow.random(int(rng.integers(3, 9)), rng, "periodic")
        da, db = lax_rhs(J, HierarchyPolynomial(coeffs))
        expected_da, expected_db = oracle.lax_rates(J, coeffs)
        scale = max(1.0, np.max(np.abs(expected_da)), np.max(np.abs(expected_db)))
        assert np.max(np.abs(da - expected_da)) <= 1e-10 * scale
        assert np.max(np.abs(db - expected_db)) <= 1e-10 * scale


def test_free_operator_is_a_fixed_point():
    for boundary in ("periodic", "eventually_free"):
        J = JacobiWindow.free(10, boundary)
        da, db = lax_rhs(J, HierarchyPolynomial((0.3, 1.0)))
        assert np.all(da == 0.0) and np.all(db == 0.0)


@pytest.mark.parametrize("coeffs", [(1.0,), (0.5, 1.0)])
def test_flow_is_isospectral(periodic8, coeffs):
    poly = HierarchyPolynomial(coeffs)
    before = spectrum(periodic8).eigenvalues
    state = evolve(periodic8, poly, 1.0)
    assert isinstance(state, FlowState)
    assert state.steps == 1000 and state.t == pytest.approx(1.0)
    assert np.max(np.abs(spectrum(state.J).eigenvalues - before)) < 1e-8
    first, second = trace_invariants(periodic8)
    moved = trace_invariants(state.J)
    assert abs(moved[0] - first) < 1e-9 and abs(moved[1] - second) < 1e-9


def test_zero_time_returns_initial_window(periodic8):
    state = evolve(periodic8, HierarchyPolynomial((1.0,)), 0.0)
    assert state.J is periodic8 and state.steps == 0


def test_group_action(periodic8):
    poly = HierarchyPolynomial((0.5, 1.0))
    assert group_action_check(periodic8, poly, 0.25, 0.25) < 1e-7
    assert group_action_check(periodic8, poly, -0.3, 0.3) < 1e-7


def test_step_halving_agrees(periodic8):
    assert convergence_check(periodic8, HierarchyPolynomial((1.0,)), 0.5) < 1e-9


def test_flow_commutes_with_shift(periodic8):
    poly = HierarchyPolynomial((0.5, 1.0))
    direct = shift_left(evolve(periodic8, poly, 0.3).J)
    shifted = evolve(shift_left(periodic8), poly, 0.3).J
    assert np.allclose(direct.a, shifted.a, atol=1e-12)
    assert np.allclose(direct.b, shifted.b, atol=1e-12)


def test_backward_flow_undoes_forward(periodic8):
    poly = HierarchyPolynomial((1.0,))
    there = evolve(periodic8, poly, 0.4).J
    back = evolve(there, poly, -0.4).J
    assert np.allclose(back.a, periodic8.a, atol=1e-10)
    assert np.allclose(back.b, periodic8.b, atol=1e-10)


def test_iter_flow_yields_every_step(periodic8):
    states = list(iter_flow(periodic8, HierarchyPolynomial((1.0,)), 0.01))
    assert [state.steps for state in states] == list(range(1, 11))
    assert states[-1].t == pytest.approx(0.01)


def test_breakdown_reports_step():
    J = JacobiWindow(np.array([1.0, 2.0, 0.5, 1.5]), np.array([3.0, -3.0, 2.0, -2.0]))
    with pytest.raises(FlowBreakdownError) as info:
        evolve(J, HierarchyPolynomial((1.0,)), 500.0, dt=5.0)
    assert info.value.step >= 1


def test_spectral_drift_samples(periodic8):
    samples, final = spectral_drift(periodic8, HierarchyPolynomial((1.0,)), 0.05, every=10)
    assert [s.step for s in samples] == [0, 10, 20, 30, 40, 50]
    assert final.steps == 50
    assert max(s.eig_drift for s in samples) < 1e-10


def test_flow_state_record(periodic8):
    state = evolve(periodic8, HierarchyPolynomial((1.0,)), 0.01)
    again = FlowState.from_record(state.to_record())
    assert np.array_equal(again.J.a, state.J.a) and again.steps == state.steps


def test_buffer_helpers(caplog):
    b = np.zeros(20)
    b[3] = 0.5
    J = JacobiWindow(np.ones(20), b, "eventually_free")
    assert support_margin(J) == 3
    assert required_buffer(0.5, 1) == 5
    assert tail_deviation(J) == 0.0
    with caplog.at_level(logging.WARNING, logger="todaflow.hierarchy"):
        state = evolve(J, HierarchyPolynomial((1.0,)), 0.5)
    assert "window buffer" in caplog.text
    assert tail_deviation(state.J) > 0.0
