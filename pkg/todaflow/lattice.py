"""Jacobi operators on finite windows of the integer lattice.

A window stores a_n, b_n for sites 0..N-1 together with a boundary model that
says what the operator looks like outside the window: a periodic repetition,
or the free operator (a = 1, b = 0). Powers of J are always those of the
operator on the whole lattice; they are read off a dense patch that is wide
enough for no path of length k to reach its edge.
"""
import logging
from dataclasses import dataclass
from enum import Enum
from typing import Any, Dict, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import linalg

from .errors import DimensionError, PowerCapError, UnsupportedBoundaryError

logger = logging.getLogger(__name__)

K_MAX = 16
NORM_BOUND = 2.0


class Boundary(str, Enum):
    PERIODIC = "periodic"
    EVENTUALLY_FREE = "eventually_free"

    @classmethod
    def parse(cls, value: Union["Boundary", str]) -> "Boundary":
        if isinstance(value, Boundary):
            return value
        key = str(value).strip().lower().replace("-", "_").replace(" ", "_")
        aliases = {
            "periodic": cls.PERIODIC,
            "eventually_free": cls.EVENTUALLY_FREE,
            "eventuallyfree": cls.EVENTUALLY_FREE,
            "free": cls.EVENTUALLY_FREE,
        }
        try:
            return aliases[key]
        except KeyError:
            raise ValueError(f"unknown boundary '{value}'") from None


def _tridiagonal(off: np.ndarray, diag: np.ndarray) -> np.ndarray:
    return np.diag(diag) + np.diag(off, 1) + np.diag(off, -1)


@dataclass(frozen=True, eq=False)
class JacobiWindow:
    a: np.ndarray
    b: np.ndarray
    boundary: Boundary = Boundary.PERIODIC

    def __post_init__(self) -> None:
        a = np.array(self.a, dtype=float)
        b = np.array(self.b, dtype=float)
        if a.ndim != 1 or a.shape != b.shape:
            raise DimensionError(f"a and b must be 1-d arrays of equal length, got {a.shape} and {b.shape}")
        if a.size < 3:
            raise DimensionError("a Jacobi window needs at least 3 sites")
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
            raise ValueError("Jacobi entries must be finite")
        if np.any(a <= 0.0):
            raise ValueError("off-diagonal entries a_n must be positive")
        a.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "boundary", Boundary.parse(self.boundary))

    @property
    def sites(self) -> int:
        return int(self.a.size)

    @property
    def periodic(self) -> bool:
        return self.boundary is Boundary.PERIODIC

    def coefficients(self, lo: int, hi: int) -> Tuple[np.ndarray, np.ndarray]:
        """a_n, b_n for n in [lo, hi), resolved by the boundary model."""
        idx = np.arange(lo, hi)
        if self.periodic:
            idx = idx % self.sites
            return self.a[idx], self.b[idx]
        inside = (idx >= 0) & (idx < self.sites)
        clipped = np.clip(idx, 0, self.sites - 1)
        return np.where(inside, self.a[clipped], 1.0), np.where(inside, self.b[clipped], 0.0)

    def a_at(self, n: int) -> float:
        return float(self.coefficients(n, n + 1)[0][0])

    def b_at(self, n: int) -> float:
        return float(self.coefficients(n, n + 1)[1][0])

    def dense(self) -> np.ndarray:
        """N x N realisation: folded for Periodic, truncated for EventuallyFree."""
        matrix = _tridiagonal(self.a[:-1], self.b)
        if self.periodic:
            matrix[-1, 0] += self.a[-1]
            matrix[0, -1] += self.a[-1]
        return matrix

    def lifted(self, radius: int) -> np.ndarray:
        """Dense matrix of the lattice operator restricted to sites -radius .. N-1+radius."""
        a, b = self.coefficients(-radius, self.sites + radius)
        return _tridiagonal(a[:-1], b)

    def with_entries(self, a: Sequence[float], b: Sequence[float]) -> "JacobiWindow":
        return JacobiWindow(np.asarray(a), np.asarray(b), self.boundary)

    @classmethod
    def free(cls, sites: int, boundary: Union[Boundary, str] = Boundary.PERIODIC) -> "JacobiWindow":
        return cls(np.ones(sites), np.zeros(sites), Boundary.parse(boundary))

    @classmethod
    def random(
        cls,
        sites: int,
        rng: np.random.Generator,
        boundary: Union[Boundary, str] = Boundary.PERIODIC,
        a_range: Tuple[float, float] = (0.5, 0.8),
        b_range: Tuple[float, float] = (-0.3, 0.3),
    ) -> "JacobiWindow":
        a = rng.uniform(a_range[0], a_range[1], size=sites)
        b = rng.uniform(b_range[0], b_range[1], size=sites)
        return cls(a, b, Boundary.parse(boundary))

    def to_record(self) -> Dict[str, Any]:
        return {
            "sites": self.sites,
            "boundary": self.boundary.value,
            "a": [float(x) for x in self.a],
            "b": [float(x) for x in self.b],
        }

    @classmethod
    def from_record(cls, record: Dict[str, Any]) -> "JacobiWindow":
        missing = [key for key in ("a", "b") if key not in record]
        if missing:
            raise ValueError(f"operator record is missing {', '.join(missing)}")
        window = cls(
            np.asarray(record["a"], dtype=float),
            np.asarray(record["b"], dtype=float),
            Boundary.parse(record.get("boundary", Boundary.PERIODIC)),
        )
        sites = record.get("sites")
        if sites is not None and int(sites) != window.sites:
            raise DimensionError(f"record declares {sites} sites but carries {window.sites} entries")
        return window


@dataclass(frozen=True)
class SpectrumReport:
    eigenvalues: np.ndarray
    residual: float


@dataclass(frozen=True, eq=False)
class PowerTable:
    """Entries <delta_n, J^k delta_{n+s}> for s = 0, 1, 2 over a block of sites."""

    first_site: int
    k_max: int
    entries: np.ndarray

    @property
    def count(self) -> int:
        return int(self.entries.shape[2])

    def _column(self, k: int, n: int) -> int:
        if k < 0 or k > self.k_max:
            raise PowerCapError(f"power {k} outside table range 0..{self.k_max}")
        col = n - self.first_site
        if col < 0 or col >= self.count:
            raise IndexError(f"site {n} outside table range {self.first_site}..{self.first_site + self.count - 1}")
        return col

    def diag(self, k: int, n: int) -> float:
        return float(self.entries[k, 0, self._column(k, n)])

    def off(self, k: int, n: int, step: int = 1) -> float:
        return float(self.entries[k, step, self._column(k, n)])


def power_table(
    J: JacobiWindow,
    k_max: int,
    lo: int = 0,
    hi: Optional[int] = None,
    cap: int = K_MAX,
) -> PowerTable:
    if k_max > cap:
        raise PowerCapError(f"power {k_max} exceeds K_max={cap}")
    hi = J.sites if hi is None else hi
    count = hi - lo
    if count <= 0:
        raise DimensionError("empty site range")
    radius = k_max + 3
    a, b = J.coefficients(lo - radius, hi + radius)
    patch = _tridiagonal(a[:-1], b)
    rows = np.arange(radius, radius + count)
    strip = np.eye(patch.shape[0])[rows]
    entries = np.empty((k_max + 1, 3, count))
    for k in range(k_max + 1):
        for step in range(3):
            entries[k, step] = strip[np.arange(count), rows + step]
        strip = strip @ patch
    return PowerTable(first_site=lo, k_max=k_max, entries=entries)


def apply(J: JacobiWindow, u: Sequence[complex]) -> np.ndarray:
    u = np.asarray(u, dtype=complex)
    if u.shape != (J.sites,):
        raise DimensionError(f"vector of length {u.shape} does not match {J.sites} sites")
    a, b = J.a, J.b
    if J.periodic:
        return a * np.roll(u, -1) + np.roll(a * u, 1) + b * u
    right = np.zeros_like(u)
    right[:-1] = a[:-1] * u[1:]
    left = np.zeros_like(u)
    left[1:] = a[:-1] * u[:-1]
    return right + left + b * u


def shift_left(J: JacobiWindow) -> JacobiWindow:
    """SJ: every a_n, b_n replaced by a_{n+1}, b_{n+1}."""
    a, b = J.coefficients(1, J.sites + 1)
    return J.with_entries(a, b)


def shift_right(J: JacobiWindow) -> JacobiWindow:
    """S*J: every a_n, b_n replaced by a_{n-1}, b_{n-1}."""
    a, b = J.coefficients(-1, J.sites - 1)
    return J.with_entries(a, b)


def diag_entry(J: JacobiWindow, k: int, n: int, cap: int = K_MAX) -> float:
    """(J^k)_n = <delta_n, J^k delta_n>."""
    return power_table(J, k, n, n + 1, cap).diag(k, n)


def offdiag_entry(J: JacobiWindow, k: int, n: int, cap: int = K_MAX) -> float:
    """(LJ^k)_n = <delta_n, J^k delta_{n+1}>."""
    return power_table(J, k, n, n + 1, cap).off(k, n)


def spectrum(J: JacobiWindow) -> SpectrumReport:
    if not J.periodic:
        raise UnsupportedBoundaryError("spectrum needs a periodic window; truncated spectra are not flow invariants")
    matrix = J.dense()
    values, vectors = linalg.eigh(matrix)
    residual = float(np.max(np.abs(matrix @ vectors - vectors * values)))
    return SpectrumReport(eigenvalues=values, residual=residual)


def operator_norm(J: JacobiWindow, pad: int = 32) -> float:
    if J.periodic:
        return float(np.max(np.abs(linalg.eigvalsh(J.dense()))))
    # the free tails alone already have norm 2
    return max(NORM_BOUND, float(np.max(np.abs(linalg.eigvalsh(J.lifted(pad))))))


def norm_regime(J: JacobiWindow, tol: float = 1e-12) -> str:
    norm = operator_norm(J)
    if norm <= NORM_BOUND + tol:
        return "norm<=2"
    logger.warning("operator norm %.6g exceeds %.1f; running in the uniformly-bounded regime", norm, NORM_BOUND)
    return "uniformly-bounded"


def check_power_recursions(J: JacobiWindow, t_max: int = 6) -> float:
    """Max residual of the three one-step recursions for (J^t)_n and (LJ^t)_n over the window."""
    N = J.sites
    table = power_table(J, t_max, -1, N + 1)
    E0, E1, E2 = table.entries[:, 0], table.entries[:, 1], table.entries[:, 2]
    a, b = J.coefficients(-1, N + 1)
    c = np.arange(1, N + 1)
    worst = 0.0
    for t in range(1, t_max + 1):
        diag_rec = E0[t, c] - (a[c] * E1[t - 1, c] + a[c - 1] * E1[t - 1, c - 1] + b[c] * E0[t - 1, c])
        left_rec = E1[t, c] - (a[c - 1] * E2[t - 1, c - 1] + a[c] * E0[t - 1, c + 1] + b[c] * E1[t - 1, c])
        right_rec = E1[t, c] - (a[c + 1] * E2[t - 1, c] + a[c] * E0[t - 1, c] + b[c + 1] * E1[t - 1, c])
        worst = max(worst, float(np.max(np.abs(np.concatenate([diag_rec, left_rec, right_rec])))))
    return worst
