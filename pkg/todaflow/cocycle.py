"""Transfer-matrix side of the Toda hierarchy.

Everything here is written at a reference site n. The one-step transfer
matrix M_n maps (-u_n, a_{n-1} u_{n-1}) to (-u_{n+1}, a_n u_n) for solutions
of Ju = zu. B(J) at site n is the trace-zero polynomial matrix generating the
cocycle T(t, J) through dT/dt = B(t . J) T; B(SJ) at site n is B(J) at n+1 and
B(S*J) at site n is B(J) at n-1.
"""
import logging
from dataclasses import dataclass
from typing import Iterator, List, Optional, Sequence, Tuple

import numpy as np
from numpy.polynomial import Polynomial
from numpy.polynomial import polynomial as npoly

from .errors import DegenerateInputError, FlowBreakdownError, IntegrityError, PolyShapeError
from .hierarchy import DEFAULT_DT, FlowState, HierarchyPolynomial, lax_rhs
from .integrator import plan_steps, rk4_step
from .lattice import JacobiWindow, PowerTable, power_table

logger = logging.getLogger(__name__)

DET_LIMIT = 1e-6
SHAPE_TOL = 1e-9


def complex_poly(coeffs: Sequence[complex]) -> Polynomial:
    return Polynomial(np.asarray(coeffs, dtype=complex))


Z = complex_poly([0.0, 1.0])


def coefficient(poly: Polynomial, k: int) -> complex:
    coef = poly.coef
    return complex(coef[k]) if 0 <= k < coef.size else 0j


def padded(poly: Polynomial, length: int) -> np.ndarray:
    out = np.zeros(length, dtype=complex)
    coef = poly.coef[:length]
    out[:coef.size] = coef
    return out


def honest_degree(poly: Polynomial, tol: float = 0.0) -> int:
    """Index of the highest coefficient above tol; -1 for the zero polynomial."""
    nonzero = np.flatnonzero(np.abs(poly.coef) > tol)
    return int(nonzero[-1]) if nonzero.size else -1


def max_coefficient(poly: Polynomial) -> float:
    return float(np.max(np.abs(poly.coef))) if poly.coef.size else 0.0


@dataclass(frozen=True, eq=False)
class PolyMatrix2:
    a11: Polynomial
    a12: Polynomial
    a21: Polynomial
    a22: Polynomial

    @property
    def A(self) -> Polynomial:
        return self.a11

    @property
    def C(self) -> Polynomial:
        return self.a12

    @property
    def D(self) -> Polynomial:
        return self.a21

    def __call__(self, z: complex) -> np.ndarray:
        return np.array([[self.a11(z), self.a12(z)], [self.a21(z), self.a22(z)]], dtype=complex)

    def evaluate_many(self, zs: Sequence[complex]) -> np.ndarray:
        zs = np.asarray(zs, dtype=complex)
        out = np.empty((zs.size, 2, 2), dtype=complex)
        out[:, 0, 0] = self.a11(zs)
        out[:, 0, 1] = self.a12(zs)
        out[:, 1, 0] = self.a21(zs)
        out[:, 1, 1] = self.a22(zs)
        return out

    def trace(self) -> Polynomial:
        return self.a11 + self.a22

    def degrees(self) -> Tuple[int, int, int, int]:
        return tuple(honest_degree(p) for p in (self.a11, self.a12, self.a21, self.a22))


@dataclass(frozen=True, eq=False)
class TransferState:
    matrix: np.ndarray
    z: complex
    t: float = 0.0
    det_drift: float = 0.0

    @property
    def det(self) -> complex:
        m = self.matrix
        return complex(m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0])


@dataclass(frozen=True, eq=False)
class GHReport:
    sites: Tuple[int, ...]
    G: Tuple[Polynomial, ...]
    H: Tuple[Polynomial, ...]

    def at(self, n: int) -> Tuple[Polynomial, Polynomial]:
        i = self.sites.index(n)
        return self.G[i], self.H[i]

    def evaluate(self, z: complex) -> Tuple[np.ndarray, np.ndarray]:
        return np.array([g(z) for g in self.G]), np.array([h(z) for h in self.H])


def transfer_matrix(J: JacobiWindow, n: int, z: complex) -> TransferState:
    a, b = J.a_at(n), J.b_at(n)
    matrix = np.array([[(z - b) / a, 1.0 / a], [-a, 0.0]], dtype=complex)
    return TransferState(matrix=matrix, z=complex(z))


def _table(J: JacobiWindow, k_max: int, lo: int, hi: int, table: Optional[PowerTable]) -> PowerTable:
    return table if table is not None else power_table(J, k_max, lo, hi)


def _g_coeffs(table: PowerTable, n: int, r: int) -> np.ndarray:
    # z^m carries (J^{r-1-m})_n
    return np.array([table.diag(r - 1 - m, n) for m in range(r)], dtype=complex)


def _h_coeffs(table: PowerTable, a_n: float, n: int, r: int) -> np.ndarray:
    coeffs = np.zeros(r + 1, dtype=complex)
    coeffs[r] = 1.0
    coeffs[0] -= table.diag(r, n)
    for j in range(1, r):
        coeffs[r - 1 - j] += 2.0 * a_n * table.off(j, n)
    return coeffs


def g_poly(J: JacobiWindow, n: int, r: int, table: Optional[PowerTable] = None) -> Polynomial:
    """G^{(r)}_n = sum_{j<r} z^{r-1-j} (J^j)_n."""
    if r < 1:
        raise ValueError("r must be positive")
    return complex_poly(_g_coeffs(_table(J, r - 1, n, n + 1, table), n, r))


def h_poly(J: JacobiWindow, n: int, r: int, table: Optional[PowerTable] = None) -> Polynomial:
    """H^{(r)}_n = z^r - (J^r)_n + 2 a_n sum_{1<=j<r} z^{r-1-j} (LJ^j)_n."""
    if r < 1:
        raise ValueError("r must be positive")
    return complex_poly(_h_coeffs(_table(J, r, n, n + 1, table), J.a_at(n), n, r))


def _weighted_gh(table: PowerTable, a_n: float, n: int, poly: HierarchyPolynomial) -> Tuple[np.ndarray, np.ndarray]:
    d = poly.degree
    G = np.zeros(d, dtype=complex)
    H = np.zeros(d + 1, dtype=complex)
    for r, weight in enumerate(poly.coeffs, start=1):
        G[:r] += weight * _g_coeffs(table, n, r)
        H[:r + 1] += weight * _h_coeffs(table, a_n, n, r)
    return G, H


def gh_report(J: JacobiWindow, poly: HierarchyPolynomial, sites: Optional[Sequence[int]] = None) -> GHReport:
    sites = tuple(range(J.sites)) if sites is None else tuple(sites)
    table = power_table(J, poly.degree, min(sites), max(sites) + 1)
    G, H = [], []
    for n in sites:
        g, h = _weighted_gh(table, J.a_at(n), n, poly)
        G.append(complex_poly(g))
        H.append(complex_poly(h))
    return GHReport(sites=sites, G=tuple(G), H=tuple(H))


def _b_coefficients(
    J: JacobiWindow,
    n: int,
    poly: HierarchyPolynomial,
    table: Optional[PowerTable] = None,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    d = poly.degree
    table = _table(J, d, n - 1, n + 1, table)
    G, H = _weighted_gh(table, J.a_at(n), n, poly)
    G_prev, _ = _weighted_gh(table, J.a_at(n - 1), n - 1, poly)
    b_n = J.b_at(n)
    a_prev = J.a_at(n - 1)
    zG = np.concatenate([[0.0], G])
    A = 2.0 * (zG - b_n * np.append(G, 0.0)) - H
    return A, 2.0 * G, -2.0 * a_prev ** 2 * G_prev


def build_B(
    J: JacobiWindow,
    n: int,
    poly: HierarchyPolynomial,
    table: Optional[PowerTable] = None,
) -> PolyMatrix2:
    A, C, D = _b_coefficients(J, n, poly, table)
    return PolyMatrix2(complex_poly(A), complex_poly(C), complex_poly(D), complex_poly(-A))


def build_B_quadratic(J: JacobiWindow, n: int, p1: float, p2: float) -> PolyMatrix2:
    """Closed form of B(J) for 1 + p1 z + p2 z^2 in terms of a_{n-1}, a_n, b_{n-1}, b_n."""
    a0, a1 = J.a_at(n - 1), J.a_at(n)
    b0, b1 = J.b_at(n - 1), J.b_at(n)
    A = [a0 ** 2 * p2 - a1 ** 2 * p2 - b1 * (p1 + b1 * p2), p1, p2]
    C = [2.0 * p1 + 2.0 * b1 * p2, 2.0 * p2]
    D = [-2.0 * a0 ** 2 * (p1 + b0 * p2), -2.0 * a0 ** 2 * p2]
    return PolyMatrix2(complex_poly(A), complex_poly(C), complex_poly(D), -complex_poly(A))


def b_values(J: JacobiWindow, n: int, poly: HierarchyPolynomial, zs: Sequence[complex]) -> np.ndarray:
    """B(J) at site n evaluated at every z, shape (len(zs), 2, 2)."""
    zs = np.asarray(zs, dtype=complex)
    A, C, D = _b_coefficients(J, n, poly)
    out = np.empty((zs.size, 2, 2), dtype=complex)
    out[:, 0, 0] = npoly.polyval(zs, A)
    out[:, 0, 1] = npoly.polyval(zs, C)
    out[:, 1, 0] = npoly.polyval(zs, D)
    out[:, 1, 1] = -out[:, 0, 0]
    return out


def recover_p_coefficients(C: Polynomial, J: JacobiWindow, n: int, table: Optional[PowerTable] = None) -> np.ndarray:
    """p_1..p_d with C = 2 G_n, by descending recursion from the top coefficient."""
    c = np.asarray(C.coef, dtype=complex)
    nonzero = np.flatnonzero(c != 0)
    if nonzero.size == 0:
        raise DegenerateInputError("cannot recover p from the zero polynomial")
    d = int(nonzero[-1]) + 1
    table = _table(J, d - 1, n, n + 1, table)
    p = np.zeros(d + 1, dtype=complex)
    p[d] = c[d - 1] / 2.0
    for k in range(d - 1, 0, -1):
        p[k] = c[k - 1] / 2.0 - sum(p[j] * table.diag(j - k, n) for j in range(k + 1, d + 1))
    return p[1:]


def recover_p(C: Polynomial, J: JacobiWindow, n: int, table: Optional[PowerTable] = None) -> HierarchyPolynomial:
    p = recover_p_coefficients(C, J, n, table)
    scale = max(1.0, float(np.max(np.abs(p))))
    if np.max(np.abs(p.imag)) > SHAPE_TOL * scale:
        raise DegenerateInputError("recovered coefficients are not real")
    return HierarchyPolynomial(tuple(p.real))


def compute_q(B: PolyMatrix2, J: JacobiWindow, n: int, table: Optional[PowerTable] = None) -> np.ndarray:
    """q_1..q_d from the descending recursion on the coefficients of A and C."""
    scale = max(1.0, max_coefficient(B.A), max_coefficient(B.C))
    d = honest_degree(B.A, SHAPE_TOL * scale)
    if d < 1:
        raise PolyShapeError("A(z) must have degree at least 1")
    if honest_degree(B.C, SHAPE_TOL * scale) > d - 1 or honest_degree(B.D, SHAPE_TOL * scale) > d - 1:
        raise PolyShapeError(f"C and D must have degree below deg A = {d}")
    if max_coefficient(B.trace()) > SHAPE_TOL * scale:
        raise PolyShapeError("B must have trace zero")

    A = padded(B.A, d + 1)
    C = padded(B.C, d + 1)
    a_n, b_n = J.a_at(n), J.b_at(n)
    table = _table(J, max(d - 2, 0), n, n + 1, table)
    q = np.zeros(d + 2, dtype=complex)
    for k in range(d, 0, -1):
        shifted = sum(table.off(i, n) * q[k + 1 + i] for i in range(1, d - k))
        q[k] = -A[k] + C[k - 1] - b_n * C[k] - 2.0 * a_n * shifted
    return q[1:d + 1]


def iter_cocycle(
    J0: JacobiWindow,
    poly: HierarchyPolynomial,
    zs: Sequence[complex],
    t_final: float,
    dt: float = DEFAULT_DT,
    site: int = 0,
    flow_poly: Optional[HierarchyPolynomial] = None,
    det_limit: float = DET_LIMIT,
) -> Iterator[Tuple[FlowState, np.ndarray, np.ndarray]]:
    """Integrate the Lax flow and dT/dt = B(t . J) T for every z in one RK4 pass.

    Yields (flow state, T stack of shape (len(zs), 2, 2), per-z det drift so far)
    after every step.
    """
    flow_poly = flow_poly or poly
    zs = np.atleast_1d(np.asarray(zs, dtype=complex))
    steps, h = plan_steps(t_final, dt)
    boundary = J0.boundary

    def rhs(state):
        a, b, T = state
        J = JacobiWindow(a, b, boundary)
        da, db = lax_rhs(J, flow_poly)
        return da, db, b_values(J, site, poly, zs) @ T

    a, b = np.array(J0.a), np.array(J0.b)
    T = np.tile(np.eye(2, dtype=complex), (zs.size, 1, 1))
    drift = np.zeros(zs.size)
    for step in range(1, steps + 1):
        try:
            a, b, T = rk4_step(rhs, (a, b, T), h)
        except ValueError as exc:
            raise FlowBreakdownError(step) from exc
        if np.any(a <= 0.0) or not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
            raise FlowBreakdownError(step)
        det = T[:, 0, 0] * T[:, 1, 1] - T[:, 0, 1] * T[:, 1, 0]
        drift = np.maximum(drift, np.abs(det - 1.0))
        if np.max(drift) > det_limit:
            raise IntegrityError(f"det T drifted by {np.max(drift):.3g} at step {step}")
        yield FlowState(J=JacobiWindow(a, b, boundary), t=step * h, dt=h, steps=step), T, drift


def integrate_cocycle(
    J0: JacobiWindow,
    poly: HierarchyPolynomial,
    zs: Sequence[complex],
    t_final: float,
    dt: float = DEFAULT_DT,
    site: int = 0,
    flow_poly: Optional[HierarchyPolynomial] = None,
    det_limit: float = DET_LIMIT,
) -> Tuple[FlowState, List[TransferState]]:
    zs = np.atleast_1d(np.asarray(zs, dtype=complex))
    flow = FlowState(J=J0, t=0.0, dt=dt, steps=0)
    T = np.tile(np.eye(2, dtype=complex), (zs.size, 1, 1))
    drift = np.zeros(zs.size)
    for flow, T, drift in iter_cocycle(J0, poly, zs, t_final, dt, site, flow_poly, det_limit):
        pass
    states = [
        TransferState(matrix=T[i].copy(), z=complex(zs[i]), t=flow.t, det_drift=float(drift[i]))
        for i in range(zs.size)
    ]
    return flow, states


def evolve_T(
    J0: JacobiWindow,
    poly: HierarchyPolynomial,
    z: complex,
    t_final: float,
    dt: float = DEFAULT_DT,
    site: int = 0,
    flow_poly: Optional[HierarchyPolynomial] = None,
) -> TransferState:
    _, (state,) = integrate_cocycle(J0, poly, [z], t_final, dt, site, flow_poly)
    return state
