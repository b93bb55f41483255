from types import SimpleNamespace

import numpy as np
import pytest

from todaflow.lattice import JacobiWindow


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


@pytest.fixture
def periodic8(rng):
    return JacobiWindow.random(8, rng, "periodic")


@pytest.fixture
def free_window(rng):
    # random core of 6 sites inside a free buffer of 12 on each side
    a = np.ones(30)
    b = np.zeros(30)
    a[12:18] = rng.uniform(0.5, 0.8, size=6)
    b[12:18] = rng.uniform(-0.3, 0.3, size=6)
    return JacobiWindow(a, b, "eventually_free")


def _ring(J, power):
    """Dense matrix of J repeated around a ring long enough that no path of length `power` wraps."""
    copies = int(np.ceil((2 * power + 6) / J.sites)) + 1
    a = np.tile(J.a, copies)
    b = np.tile(J.b, copies)
    size = a.size
    matrix = np.diag(b)
    for i in range(size):
        matrix[i, (i + 1) % size] += a[i]
        matrix[(i + 1) % size, i] += a[i]
    return matrix


def _padded(J, pad):
    """J as an explicit finite matrix with `pad` free sites appended on both sides."""
    a = np.concatenate([np.ones(pad), J.a, np.ones(pad)])
    b = np.concatenate([np.zeros(pad), J.b, np.zeros(pad)])
    return np.diag(b) + np.diag(a[:-1], 1) + np.diag(a[:-1], -1)


def _power_entry(J, k, n, step=0):
    if J.periodic:
        matrix = _ring(J, k + step)
        centre = J.sites * (matrix.shape[0] // J.sites // 2) + n % J.sites
    else:
        pad = k + step + 4
        matrix = _padded(J, pad)
        centre = pad + n
    return float(np.linalg.matrix_power(matrix, k)[centre, (centre + step) % matrix.shape[0]])


def _lax_rates(J, coeffs):
    """a', b' from PJ - JP on a periodic ring, P built with a cyclic upper/lower split."""
    d = len(coeffs)
    matrix = _ring(J, 2 * d + 2)
    size = matrix.shape[0]
    dist = (np.arange(size)[None, :] - np.arange(size)[:, None]) % size
    sign = np.where((dist > 0) & (dist < size / 2), 1.0, 0.0) - np.where(dist > size / 2, 1.0, 0.0)
    P = np.zeros_like(matrix)
    power = np.eye(size)
    for weight in coeffs:
        power = power @ matrix
        P += weight * sign * power
    F = P @ matrix - matrix @ P
    rows = np.arange(J.sites)
    return F[rows, rows + 1], F[rows, rows]


@pytest.fixture
def oracle():
    return SimpleNamespace(ring=_ring, padded=_padded, power_entry=_power_entry, lax_rates=_lax_rates)
