"""Weyl m-functions of eventually free Jacobi operators and their evolution under T.

At a window site n the m-functions are m_+ = -u+_{n+1}/(a_n u+_n) and
m_- = u-_{n+1}/(a_n u-_n), where u+ decays at +infinity and u- at -infinity.
Outside the window both solutions are powers of the decaying free root w, so
the recursion Ju = zu is run inward from an exact seed. Only ratios of
consecutive values are propagated.

Along the flow, (-u_{n+1}, a_n u_n) moves under dT/dt = B T with B taken at
site n + 1. The plain Moebius action of T therefore carries m_+, and the
action conjugated by diag(1, -1) carries m_-.
"""
import cmath
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Union

import numpy as np

from .cocycle import TransferState, integrate_cocycle
from .errors import DimensionError, PoleError, UnsupportedBoundaryError
from .hierarchy import DEFAULT_DT, HierarchyPolynomial, evolve, tail_deviation
from .lattice import JacobiWindow

logger = logging.getLogger(__name__)

CONTAMINATION_TOL = 1e-8


class RiemannInfinity:
    """The point at infinity of the Riemann sphere."""

    __slots__ = ()

    def __repr__(self) -> str:
        return "INFINITY"


INFINITY = RiemannInfinity()
SpherePoint = Union[complex, RiemannInfinity]


@dataclass(frozen=True)
class HalfPlanePoint:
    z: complex

    def __post_init__(self) -> None:
        z = complex(self.z)
        if not z.imag > 0.0:
            raise ValueError(f"spectral parameter must lie in the upper half plane, got {z}")
        object.__setattr__(self, "z", z)


def as_point(z: Union[HalfPlanePoint, complex]) -> HalfPlanePoint:
    return z if isinstance(z, HalfPlanePoint) else HalfPlanePoint(complex(z))


@dataclass(frozen=True)
class MPair:
    m_plus: complex
    m_minus: complex
    z: HalfPlanePoint

    @property
    def herglotz(self) -> bool:
        return self.m_plus.imag > 0.0 and self.m_minus.imag > 0.0


@dataclass(frozen=True)
class MEvolutionReport:
    res_minus: float
    res_plus: float
    tail_deviation: float
    m_start: MPair
    m_end: MPair
    predicted: List[SpherePoint] = field(default_factory=list)

    @property
    def herglotz(self) -> bool:
        return self.m_start.herglotz and self.m_end.herglotz

    @property
    def max(self) -> float:
        return max(self.res_minus, self.res_plus)


@dataclass(frozen=True)
class MRow:
    branch: str
    z: complex
    m: complex
    t: float


def free_w(z: Union[HalfPlanePoint, complex]) -> complex:
    """Root of w + 1/w = z with |w| < 1."""
    z = as_point(z).z
    root = cmath.sqrt(z * z - 4.0)
    w = (z - root) / 2.0
    if abs(w) >= 1.0:
        w = (z + root) / 2.0
    if not abs(w) < 1.0:
        raise ValueError(f"no decaying free solution at z={z}")
    return w


def free_m(z: Union[HalfPlanePoint, complex]) -> complex:
    return -free_w(z)


def free_m_pair(z: Union[HalfPlanePoint, complex]) -> MPair:
    point = as_point(z)
    w = free_w(point)
    return MPair(m_plus=-w, m_minus=1.0 / w, z=point)


def _check_anchor(J: JacobiWindow, n: int) -> None:
    if J.periodic:
        raise UnsupportedBoundaryError("m-functions are defined for eventually free windows only")
    if not 0 <= n < J.sites:
        raise DimensionError(f"reference site {n} outside window 0..{J.sites - 1}")


def m_functions(J: JacobiWindow, n: int, z: Union[HalfPlanePoint, complex]) -> MPair:
    _check_anchor(J, n)
    point = as_point(z)
    z = point.z
    w = free_w(point)
    N = J.sites
    a, b = J.coefficients(-1, N + 1)  # index k + 1 holds site k

    # u+_{k+1} / u+_k, seeded by w at k = N
    ratio = w
    for k in range(N, n, -1):
        den = (z - b[k + 1]) - a[k + 1] * ratio
        if den == 0:
            raise PoleError(k - 1, z)
        ratio = a[k] / den
    m_plus = -ratio / a[n + 1]

    # u-_{k+1} / u-_k, seeded by 1/w at k = -1
    ratio = 1.0 / w
    for k in range(0, n + 1):
        if ratio == 0:
            raise PoleError(k, z)
        ratio = ((z - b[k + 1]) - a[k] / ratio) / a[k + 1]
    if ratio == 0:
        raise PoleError(n + 1, z)
    m_minus = ratio / a[n + 1]
    return MPair(m_plus=complex(m_plus), m_minus=complex(m_minus), z=point)


def weyl_solution(J: JacobiWindow, z: Union[HalfPlanePoint, complex], sign: int, lo: int, hi: int) -> np.ndarray:
    """u+ (sign=+1) or u- (sign=-1) on sites lo..hi-1, scaled to max |u| = 1.

    Sites must lie in -1..N+1.
    """
    if J.periodic:
        raise UnsupportedBoundaryError("Weyl solutions are built for eventually free windows only")
    N = J.sites
    if not (-1 <= lo < hi <= N + 2):
        raise DimensionError(f"site range {lo}..{hi - 1} outside -1..{N + 1}")
    z = as_point(z).z
    w = free_w(z)
    a, b = J.coefficients(-2, N + 2)  # index k + 2 holds site k
    u = {}
    if sign > 0:
        u[N + 1], u[N] = w, 1.0 + 0j
        for k in range(N, lo, -1):
            u[k - 1] = ((z - b[k + 2]) * u[k] - a[k + 2] * u[k + 1]) / a[k + 1]
    else:
        u[-1], u[0] = w, 1.0 + 0j
        for k in range(0, hi - 1):
            u[k + 1] = ((z - b[k + 2]) * u[k] - a[k + 1] * u[k - 1]) / a[k + 2]
    values = np.array([u[k] for k in range(lo, hi)], dtype=complex)
    return values / np.max(np.abs(values))


def mobius(T: Union[TransferState, np.ndarray], w: SpherePoint) -> SpherePoint:
    """(a w + b)/(c w + d), with INFINITY as an ordinary value."""
    matrix = T.matrix if isinstance(T, TransferState) else np.asarray(T, dtype=complex)
    a, b, c, d = matrix[0, 0], matrix[0, 1], matrix[1, 0], matrix[1, 1]
    if w is INFINITY:
        return INFINITY if c == 0 else complex(a / c)
    den = c * w + d
    if den == 0:
        return INFINITY
    return complex((a * w + b) / den)


def flip_conjugate(matrix: np.ndarray) -> np.ndarray:
    """diag(1, -1) M diag(1, -1)."""
    flipped = np.array(matrix, dtype=complex)
    flipped[0, 1] *= -1.0
    flipped[1, 0] *= -1.0
    return flipped


def sphere_distance(first: SpherePoint, second: SpherePoint) -> float:
    if first is INFINITY or second is INFINITY:
        return 0.0 if first is second else float("inf")
    return abs(first - second)


def check_m_evolution(
    J0: JacobiWindow,
    poly: HierarchyPolynomial,
    t: float,
    z: Union[HalfPlanePoint, complex],
    dt: float = DEFAULT_DT,
    site: Optional[int] = None,
) -> MEvolutionReport:
    """Compare m(t . J0) with the Moebius images of m(J0) under T(t, J0)."""
    n = J0.sites // 2 if site is None else site
    _check_anchor(J0, n)
    point = as_point(z)
    start = m_functions(J0, n, point)
    flow, (T,) = integrate_cocycle(J0, poly, [point.z], t, dt, site=n + 1)
    end = m_functions(flow.J, n, point)

    plus = mobius(T, start.m_plus)
    minus = mobius(flip_conjugate(T.matrix), start.m_minus)
    deviation = tail_deviation(flow.J)
    if deviation > CONTAMINATION_TOL:
        logger.warning("window tails moved by %.3g after t=%g; m-function residuals include buffer error",
                       deviation, t)
    return MEvolutionReport(
        res_minus=sphere_distance(minus, end.m_minus),
        res_plus=sphere_distance(plus, end.m_plus),
        tail_deviation=deviation,
        m_start=start,
        m_end=end,
        predicted=[plus, minus],
    )


def m_sweep(
    J0: JacobiWindow,
    poly: HierarchyPolynomial,
    zs: Sequence[complex],
    times: Sequence[float],
    dt: float = DEFAULT_DT,
    site: Optional[int] = None,
) -> List[MRow]:
    n = J0.sites // 2 if site is None else site
    rows: List[MRow] = []
    for t in times:
        J = J0 if t == 0 else evolve(J0, poly, t, dt).J
        for z in zs:
            pair = m_functions(J, n, z)
            rows.append(MRow("minus", pair.z.z, pair.m_minus, float(t)))
            rows.append(MRow("plus", pair.z.z, pair.m_plus, float(t)))
    return rows
