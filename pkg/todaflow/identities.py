"""Residual checks tying the Lax flow to the cocycle T(t, J).

Each check returns a float residual (or a small record of them); deciding
pass/fail against a tolerance is left to the caller.
"""
import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .cocycle import (
    Z,
    build_B,
    coefficient,
    compute_q,
    integrate_cocycle,
    iter_cocycle,
    max_coefficient,
    recover_p_coefficients,
    transfer_matrix,
)
from .errors import UnsupportedBoundaryError
from .hierarchy import DEFAULT_DT, HierarchyPolynomial, evolve, lax_rhs
from .lattice import JacobiWindow, power_table, shift_left

logger = logging.getLogger(__name__)

CURVATURE_STEPS = (1e-3, 5e-4, 2.5e-4)


@dataclass(frozen=True)
class MasterResiduals:
    r1: float
    r2: float
    r3: float

    @property
    def max(self) -> float:
        return max(self.r1, self.r2, self.r3)


@dataclass(frozen=True)
class PQReport:
    max_pq: float
    p_variation: float
    q_variation: float
    p_error: float

    @property
    def max(self) -> float:
        return max(self.max_pq, self.p_variation, self.q_variation, self.p_error)


@dataclass(frozen=True)
class EquivalenceReport:
    master: float
    curvature: float
    cocycle: float
    shift: float
    det_drift: float
    tolerance: float

    @property
    def max_residual(self) -> float:
        return max(self.master, self.curvature, self.cocycle, self.shift)

    @property
    def passed(self) -> bool:
        return self.max_residual < self.tolerance


def _window_index(J: JacobiWindow, n: int) -> int:
    if J.periodic:
        return n % J.sites
    if not 0 <= n < J.sites:
        raise IndexError(f"site {n} lies outside the window 0..{J.sites - 1}")
    return n


def check_master_equations(
    J: JacobiWindow,
    n: int,
    poly: HierarchyPolynomial,
    lax_poly: Optional[HierarchyPolynomial] = None,
) -> MasterResiduals:
    """Coefficientwise residuals of the three relations between B(J), B(SJ) and (a_n', b_n').

    The rates come from the Lax flow of `lax_poly` (default: `poly`).
    """
    idx = _window_index(J, n)
    da, db = lax_rhs(J, lax_poly or poly)
    a, b = J.a_at(n), J.b_at(n)
    a_rate, b_rate = da[idx], db[idx]

    table = power_table(J, poly.degree, n - 1, n + 2)
    here = build_B(J, n, poly, table)
    shifted = build_B(J, n + 1, poly, table)
    A, C, D = here.A, here.C, here.D

    r1 = shifted.D + a ** 2 * C
    r2 = shifted.A + A + a_rate / a - (Z - b) * C
    r3 = (Z - b) / a * (shifted.A - A) - (
        (-b_rate * a - (Z - b) * a_rate) / a ** 2 + a * shifted.C + D / a
    )
    return MasterResiduals(max_coefficient(r1), max_coefficient(r2), max_coefficient(r3))


def check_trace_zero(J: JacobiWindow, n: int, poly: HierarchyPolynomial) -> float:
    return max_coefficient(build_B(J, n, poly).trace())


def check_vanishing_identity(J: JacobiWindow, n: int, poly: HierarchyPolynomial) -> float:
    """|A_0 + b_n C_0 + 2 a_n sum_k (LJ^k)_n q_{k+1} - sum_k (J^k)_n q_k|."""
    d = poly.degree
    table = power_table(J, d, n - 1, n + 1)
    B = build_B(J, n, poly, table)
    q = compute_q(B, J, n, table)
    a_n, b_n = J.a_at(n), J.b_at(n)
    value = coefficient(B.A, 0) + b_n * coefficient(B.C, 0)
    value += 2.0 * a_n * sum(table.off(k, n) * q[k] for k in range(1, d))
    value -= sum(table.diag(k, n) * q[k - 1] for k in range(1, d + 1))
    return float(abs(value))


def check_pq(J: JacobiWindow, poly: HierarchyPolynomial, sites: Optional[Sequence[int]] = None) -> PQReport:
    """Recover p from C and q from (A, C) at every site; both must equal the input polynomial."""
    sites = list(range(J.sites)) if sites is None else list(sites)
    table = power_table(J, poly.degree, min(sites) - 1, max(sites) + 1)
    P, Q = [], []
    for n in sites:
        B = build_B(J, n, poly, table)
        P.append(recover_p_coefficients(B.C, J, n, table))
        Q.append(compute_q(B, J, n, table))
    P, Q = np.array(P), np.array(Q)
    target = np.array(poly.coeffs)
    return PQReport(
        max_pq=float(np.max(np.abs(P - Q))),
        p_variation=float(np.max(np.abs(P[:, None, :] - P[None, :, :]))),
        q_variation=float(np.max(np.abs(Q[:, None, :] - Q[None, :, :]))),
        p_error=float(np.max(np.abs(P - target))),
    )


def check_zero_curvature(
    J: JacobiWindow,
    n: int,
    poly: HierarchyPolynomial,
    z: complex,
    dt: float = 1e-4,
    flow_poly: Optional[HierarchyPolynomial] = None,
) -> float:
    """Central difference of M_n(t . J) at t = 0 against B_{n+1} M_n - M_n B_n."""
    flow_poly = flow_poly or poly
    forward = evolve(J, flow_poly, dt, dt).J
    backward = evolve(J, flow_poly, -dt, dt).J
    dM = (transfer_matrix(forward, n, z).matrix - transfer_matrix(backward, n, z).matrix) / (2.0 * dt)

    table = power_table(J, poly.degree, n - 1, n + 2)
    M = transfer_matrix(J, n, z).matrix
    expected = build_B(J, n + 1, poly, table)(z) @ M - M @ build_B(J, n, poly, table)(z)
    return float(np.max(np.abs(dM - expected)))


def zero_curvature_order(
    J: JacobiWindow,
    n: int,
    poly: HierarchyPolynomial,
    z: complex,
    steps: Sequence[float] = CURVATURE_STEPS,
) -> Tuple[List[float], List[float]]:
    """Residuals at each step and the observed orders between consecutive steps."""
    residuals = [check_zero_curvature(J, n, poly, z, h) for h in steps]
    orders = []
    for (h0, r0), (h1, r1) in zip(zip(steps, residuals), zip(steps[1:], residuals[1:])):
        if r0 > 0.0 and r1 > 0.0:
            orders.append(math.log(r0 / r1) / math.log(h0 / h1))
        else:
            orders.append(float("nan"))
    return residuals, orders


def check_cocycle(
    J0: JacobiWindow,
    poly: HierarchyPolynomial,
    zs: Sequence[complex],
    s: float,
    t: float,
    dt: float = DEFAULT_DT,
    site: int = 0,
    flow_poly: Optional[HierarchyPolynomial] = None,
) -> Tuple[float, float]:
    """max |T(s+t, J) - T(s, t . J) T(t, J)| over zs, and the worst det drift seen."""
    flow_t, first = integrate_cocycle(J0, poly, zs, t, dt, site, flow_poly)
    _, second = integrate_cocycle(flow_t.J, poly, zs, s, dt, site, flow_poly)
    _, direct = integrate_cocycle(J0, poly, zs, s + t, dt, site, flow_poly)
    residual = max(
        float(np.max(np.abs(whole.matrix - late.matrix @ early.matrix)))
        for whole, late, early in zip(direct, second, first)
    )
    drift = max(state.det_drift for state in (*first, *second, *direct))
    return residual, drift


def check_generator(
    J0: JacobiWindow,
    poly: HierarchyPolynomial,
    z: complex,
    s: float,
    dt: float = DEFAULT_DT,
    site: int = 0,
) -> float:
    """|T'(s) T(s)^{-1} - B(s . J)| with a five-point difference on the RK4 grid.

    s is rounded to a whole number of steps of size dt.
    """
    centre = max(2, int(round(s / dt)))
    wanted = {centre - 2: None, centre - 1: None, centre: None, centre + 1: None, centre + 2: None}
    at_centre = None
    if centre - 2 == 0:
        wanted[0] = np.eye(2, dtype=complex)
    for flow, T, _ in iter_cocycle(J0, poly, [z], (centre + 2) * dt, dt, site):
        if flow.steps in wanted:
            wanted[flow.steps] = T[0].copy()
        if flow.steps == centre:
            at_centre = flow.J
    T = [wanted[centre + k] for k in (-2, -1, 0, 1, 2)]
    derivative = (T[0] - 8.0 * T[1] + 8.0 * T[3] - T[4]) / (12.0 * dt)
    generator = derivative @ np.linalg.inv(T[2])
    table = power_table(at_centre, poly.degree, site - 1, site + 1)
    return float(np.max(np.abs(generator - build_B(at_centre, site, poly, table)(z))))


def check_shift_commutation(
    J: JacobiWindow,
    poly: HierarchyPolynomial,
    zs: Sequence[complex],
    t: float,
    dt: float = DEFAULT_DT,
    site: int = 0,
    flow_poly: Optional[HierarchyPolynomial] = None,
) -> float:
    """max |M(t . J) T(t, J) - T(t, SJ) M(J)| over zs."""
    if not J.periodic:
        raise UnsupportedBoundaryError("shift commutation needs a periodic window")
    flow, along_J = integrate_cocycle(J, poly, zs, t, dt, site, flow_poly)
    _, along_SJ = integrate_cocycle(shift_left(J), poly, zs, t, dt, site, flow_poly)
    worst = 0.0
    for T_J, T_SJ in zip(along_J, along_SJ):
        moved = transfer_matrix(flow.J, site, T_J.z).matrix
        start = transfer_matrix(J, site, T_J.z).matrix
        worst = max(worst, float(np.max(np.abs(moved @ T_J.matrix - T_SJ.matrix @ start))))
    return worst


def check_flow_equivalence(
    J0: JacobiWindow,
    poly: HierarchyPolynomial,
    t: float,
    dt: float = DEFAULT_DT,
    z_samples: Sequence[complex] = (3j,),
    lax_poly: Optional[HierarchyPolynomial] = None,
    site: int = 0,
    fd_step: float = 1e-4,
    tolerance: float = 1e-5,
) -> EquivalenceReport:
    """Run every check with B(J) built from `poly` and J moved by the Lax flow of `lax_poly`."""
    if not J0.periodic:
        raise UnsupportedBoundaryError("flow equivalence needs a periodic window")
    lax_poly = lax_poly or poly
    checkpoints = [J0, evolve(J0, lax_poly, t / 2.0, dt).J, evolve(J0, lax_poly, t, dt).J]

    master = max(
        check_master_equations(J, n, poly, lax_poly).max for J in checkpoints for n in range(J.sites)
    )
    curvature = max(
        check_zero_curvature(J, site, poly, z, fd_step, flow_poly=lax_poly) for J in checkpoints for z in z_samples
    )
    cocycle, drift = check_cocycle(J0, poly, z_samples, t / 2.0, t / 2.0, dt, site, flow_poly=lax_poly)
    shift = check_shift_commutation(J0, poly, z_samples, t, dt, site, flow_poly=lax_poly)
    report = EquivalenceReport(master, curvature, cocycle, shift, drift, tolerance)
    logger.info("flow equivalence p=%s lax=%s: max residual %.3g", poly.to_list(), lax_poly.to_list(),
                report.max_residual)
    return report
