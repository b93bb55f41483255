"""Classical fixed-step fourth-order Runge-Kutta over tuples of arrays."""
import math
from typing import Callable, Tuple

import numpy as np

State = Tuple[np.ndarray, ...]
Rhs = Callable[[State], State]


def _axpy(state: State, slope: State, h: float) -> State:
    return tuple(y + h * k for y, k in zip(state, slope))


def rk4_step(rhs: Rhs, state: State, h: float) -> State:
    k1 = rhs(state)
    k2 = rhs(_axpy(state, k1, h / 2.0))
    k3 = rhs(_axpy(state, k2, h / 2.0))
    k4 = rhs(_axpy(state, k3, h))
    return tuple(y + (h / 6.0) * (p + 2.0 * q + 2.0 * r + s) for y, p, q, r, s in zip(state, k1, k2, k3, k4))


def plan_steps(t_final: float, dt: float) -> Tuple[int, float]:
    """Number of steps and signed step so that steps * h == t_final."""
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if t_final == 0:
        return 0, 0.0
    steps = max(1, int(math.ceil(abs(t_final) / dt - 1e-9)))
    return steps, t_final / steps
