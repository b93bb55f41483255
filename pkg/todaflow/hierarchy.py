"""Lax-pair side of the Toda hierarchy: P~_j, P and the flow t . J."""
import logging
import math
from dataclasses import dataclass
from typing import Any, Dict, Iterator, List, Sequence, Tuple

import numpy as np

from .errors import FlowBreakdownError, PowerCapError, StructureViolationError
from .integrator import plan_steps, rk4_step
from .lattice import K_MAX, JacobiWindow, spectrum

logger = logging.getLogger(__name__)

DEFAULT_DT = 1e-3
STRUCTURE_TOL = 1e-10
BUFFER_PER_UNIT_TIME = 10.0


@dataclass(frozen=True)
class HierarchyPolynomial:
    """p_1..p_d of 1 + p_1 z + ... + p_d z^d; the constant 1 is implied."""

    coeffs: Tuple[float, ...]

    def __post_init__(self) -> None:
        coeffs = tuple(float(c) for c in self.coeffs)
        if not coeffs:
            raise ValueError("a hierarchy polynomial needs degree d >= 1")
        if not all(math.isfinite(c) for c in coeffs):
            raise ValueError("polynomial coefficients must be finite")
        if coeffs[-1] == 0.0:
            raise ValueError("leading coefficient p_d must be nonzero")
        object.__setattr__(self, "coeffs", coeffs)

    @classmethod
    def from_sequence(cls, values: Sequence[float]) -> "HierarchyPolynomial":
        return cls(tuple(values))

    @property
    def degree(self) -> int:
        return len(self.coeffs)

    def p(self, j: int) -> float:
        """p_j with 1-based j; zero outside 1..d."""
        if 1 <= j <= self.degree:
            return self.coeffs[j - 1]
        return 0.0

    def lax_weights(self) -> np.ndarray:
        """c_0..c_{d-1} in P = sum_j c_{d-1-j} P~_j; c_k = p_{d-k}."""
        return np.array(self.coeffs[::-1])

    def reversed(self) -> "HierarchyPolynomial":
        return HierarchyPolynomial(self.coeffs[::-1])

    def to_list(self) -> List[float]:
        return list(self.coeffs)


@dataclass(frozen=True, eq=False)
class SkewOperator:
    """Antisymmetric band matrix on a lifted patch; window site 0 sits at index `offset`."""

    matrix: np.ndarray
    offset: int
    sites: int
    half_bandwidth: int

    def window(self) -> np.ndarray:
        o, n = self.offset, self.sites
        return self.matrix[o:o + n, o:o + n]

    def entry(self, n: int, m: int) -> float:
        return float(self.matrix[self.offset + n, self.offset + m])

    def folded(self) -> np.ndarray:
        """N x N matrix of a periodic operator: columns summed over lattice images."""
        o, n = self.offset, self.sites
        rows = self.matrix[o:o + n]
        folded = np.zeros((n, n))
        for col, target in enumerate((np.arange(rows.shape[1]) - o) % n):
            folded[:, target] += rows[:, col]
        return folded


@dataclass(frozen=True)
class FlowState:
    J: JacobiWindow
    t: float
    dt: float
    steps: int

    def to_record(self) -> Dict[str, Any]:
        return {"J": self.J.to_record(), "t": float(self.t), "dt": float(self.dt), "steps": int(self.steps)}

    @classmethod
    def from_record(cls, record: Dict[str, Any]) -> "FlowState":
        return cls(
            J=JacobiWindow.from_record(record["J"]),
            t=float(record.get("t", 0.0)),
            dt=float(record.get("dt", 0.0)),
            steps=int(record.get("steps", 0)),
        )


@dataclass(frozen=True)
class DriftSample:
    step: int
    t: float
    eig_drift: float
    trace1_drift: float
    trace2_drift: float


def _skew(power: np.ndarray) -> np.ndarray:
    return np.triu(power, 1) - np.tril(power, -1)


def _assemble_P(patch: np.ndarray, poly: HierarchyPolynomial) -> np.ndarray:
    P = np.zeros_like(patch)
    power = patch
    for r, weight in enumerate(poly.coeffs, start=1):
        # J^r contributes P~_{r-1}
        P += weight * _skew(power)
        if r < poly.degree:
            power = power @ patch
    return P


def skew_part(J: JacobiWindow, j: int, cap: int = K_MAX) -> SkewOperator:
    """P~_j: upper minus lower triangular part of J^{j+1}."""
    if j < 0:
        raise ValueError("j must be non-negative")
    if j + 1 > cap:
        raise PowerCapError(f"P~_{j} needs J^{j + 1}, beyond K_max={cap}")
    radius = j + 4
    power = np.linalg.matrix_power(J.lifted(radius), j + 1)
    return SkewOperator(_skew(power), radius, J.sites, j + 1)


def build_P(J: JacobiWindow, poly: HierarchyPolynomial, cap: int = K_MAX) -> SkewOperator:
    if poly.degree > cap:
        raise PowerCapError(f"degree {poly.degree} needs powers beyond K_max={cap}")
    radius = poly.degree + 3
    return SkewOperator(_assemble_P(J.lifted(radius), poly), radius, J.sites, poly.degree)


def lax_commutator(J: JacobiWindow, poly: HierarchyPolynomial) -> Tuple[np.ndarray, int]:
    """PJ - JP on the lifted patch and the patch index of window site 0."""
    radius = poly.degree + 3
    patch = J.lifted(radius)
    P = _assemble_P(patch, poly)
    return P @ patch - patch @ P, radius


def lax_rhs(
    J: JacobiWindow,
    poly: HierarchyPolynomial,
    tol: float = STRUCTURE_TOL,
) -> Tuple[np.ndarray, np.ndarray]:
    N = J.sites
    F, o = lax_commutator(J, poly)
    rows = np.arange(o, o + N)
    db = F[rows, rows]
    da = F[rows, rows + 1]
    below = F[rows + 1, rows]

    window_rows = F[o:o + N]
    cols = np.arange(F.shape[1])
    off_band = np.abs(window_rows[np.abs(rows[:, None] - cols[None, :]) >= 2])
    scale = max(1.0, float(np.max(np.abs(window_rows))))
    off_residual = float(off_band.max()) if off_band.size else 0.0
    asym = float(np.max(np.abs(da - below)))
    if off_residual > tol * scale or asym > tol * scale:
        raise StructureViolationError(
            f"commutator is not symmetric tridiagonal: off-band {off_residual:.3g}, asymmetry {asym:.3g}"
        )
    return da.copy(), db.copy()


def _flow_rhs(J0: JacobiWindow, poly: HierarchyPolynomial):
    boundary = J0.boundary

    def rhs(state):
        a, b = state
        # raises ValueError when a stage leaves a_n > 0
        return lax_rhs(JacobiWindow(a, b, boundary), poly)

    return rhs


def support_margin(J: JacobiWindow, tol: float = 1e-12) -> int:
    """Distance from the support of J - J_free to the nearest window edge."""
    support = np.flatnonzero((np.abs(J.a - 1.0) > tol) | (np.abs(J.b) > tol))
    if support.size == 0:
        return J.sites
    return int(min(support[0], J.sites - 1 - support[-1]))


def required_buffer(t_final: float, degree: int, per_unit: float = BUFFER_PER_UNIT_TIME) -> int:
    return int(math.ceil(per_unit * abs(t_final) * degree))


def tail_deviation(J: JacobiWindow, edge: int = 2) -> float:
    edges = np.r_[0:edge, J.sites - edge:J.sites]
    return float(max(np.max(np.abs(J.a[edges] - 1.0)), np.max(np.abs(J.b[edges]))))


def iter_flow(
    J0: JacobiWindow,
    poly: HierarchyPolynomial,
    t_final: float,
    dt: float = DEFAULT_DT,
) -> Iterator[FlowState]:
    """Yield the FlowState after every RK4 step of the Lax flow."""
    steps, h = plan_steps(t_final, dt)
    rhs = _flow_rhs(J0, poly)
    a, b = np.array(J0.a), np.array(J0.b)
    for step in range(1, steps + 1):
        try:
            a, b = rk4_step(rhs, (a, b), h)
        except ValueError as exc:
            raise FlowBreakdownError(step) from exc
        if np.any(a <= 0.0) or not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
            raise FlowBreakdownError(step)
        yield FlowState(J=JacobiWindow(a, b, J0.boundary), t=step * h, dt=h, steps=step)


def warn_on_short_buffer(
    J0: JacobiWindow,
    degree: int,
    t_final: float,
    per_unit: float = BUFFER_PER_UNIT_TIME,
) -> bool:
    """Log a warning and return False when free tails may be reached by time t_final."""
    if J0.periodic:
        return True
    margin = support_margin(J0)
    needed = required_buffer(t_final, degree, per_unit)
    if margin < needed:
        logger.warning("window buffer %d sites is below the %d sites required for t=%g, d=%d",
                       margin, needed, t_final, degree)
        return False
    return True


def evolve(
    J0: JacobiWindow,
    poly: HierarchyPolynomial,
    t_final: float,
    dt: float = DEFAULT_DT,
    buffer_per_unit: float = BUFFER_PER_UNIT_TIME,
) -> FlowState:
    warn_on_short_buffer(J0, poly.degree, t_final, buffer_per_unit)
    state = FlowState(J=J0, t=0.0, dt=dt, steps=0)
    for state in iter_flow(J0, poly, t_final, dt):
        pass
    return state


def _entry_distance(first: JacobiWindow, second: JacobiWindow) -> float:
    return float(max(np.max(np.abs(first.a - second.a)), np.max(np.abs(first.b - second.b))))


def group_action_check(
    J0: JacobiWindow,
    poly: HierarchyPolynomial,
    s: float,
    t: float,
    dt: float = DEFAULT_DT,
) -> float:
    """|(s+t) . J0 - s . (t . J0)| entrywise."""
    direct = evolve(J0, poly, s + t, dt).J
    composed = evolve(evolve(J0, poly, t, dt).J, poly, s, dt).J
    return _entry_distance(direct, composed)


def convergence_check(J0: JacobiWindow, poly: HierarchyPolynomial, t_final: float, dt: float = DEFAULT_DT) -> float:
    """Entrywise difference between runs at dt and dt/2."""
    return _entry_distance(evolve(J0, poly, t_final, dt).J, evolve(J0, poly, t_final, dt / 2.0).J)


def trace_invariants(J: JacobiWindow) -> Tuple[float, float]:
    """tr J and tr J^2, renormalised by the free operator for EventuallyFree windows."""
    first = float(np.sum(J.b))
    second = float(np.sum(J.b ** 2 + 2.0 * J.a ** 2))
    if not J.periodic:
        second -= 2.0 * J.sites
    return first, second


def spectral_drift(
    J0: JacobiWindow,
    poly: HierarchyPolynomial,
    t_final: float,
    dt: float = DEFAULT_DT,
    every: int = 1,
) -> Tuple[List[DriftSample], FlowState]:
    """Drift samples every `every` steps (and at the last step), plus the final state."""
    base_eigs = spectrum(J0).eigenvalues if J0.periodic else None
    base_traces = trace_invariants(J0)

    def sample(state: FlowState) -> DriftSample:
        eig = float("nan")
        if base_eigs is not None:
            eig = float(np.max(np.abs(spectrum(state.J).eigenvalues - base_eigs)))
        traces = trace_invariants(state.J)
        return DriftSample(
            step=state.steps,
            t=state.t,
            eig_drift=eig,
            trace1_drift=abs(traces[0] - base_traces[0]),
            trace2_drift=abs(traces[1] - base_traces[1]),
        )

    last = FlowState(J=J0, t=0.0, dt=dt, steps=0)
    samples = [sample(last)]
    for last in iter_flow(J0, poly, t_final, dt):
        if last.steps % max(1, every) == 0:
            samples.append(sample(last))
    if samples[-1].step != last.steps:
        samples.append(sample(last))
    return samples, last
