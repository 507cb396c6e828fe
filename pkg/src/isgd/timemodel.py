"""Time-domain model of loss versus batch size.

An iteration on a batch of ``n_b`` examples costs ``n_b / c1 + c2`` seconds
(compute at ``c1`` examples/s plus a fixed synchronization cost ``c2``).
After ``T`` updates the loss is modelled as ``1/sqrt(n_b*T) + 1/T``.
Substituting ``T = t / t_iter`` gives

    psi * t = sqrt(t) * sqrt((n_b + c1*c2) / (n_b*c1)) + n_b/c1 + c2

which is a quadratic in ``sqrt(t)`` with one positive root.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np


class ModelValidityWarning(UserWarning):
    """The requested point lies where fewer than one update fits in the time budget."""


@dataclass(frozen=True)
class SystemModel:
    c1: float
    c2: float = 0.0

    def __post_init__(self):
        if not self.c1 > 0:
            raise ValueError("c1 (examples per second) must be positive")
        if not self.c2 >= 0:
            raise ValueError("c2 (sync seconds) must be nonnegative")


def iter_time(n_b, sys: SystemModel):
    return n_b / sys.c1 + sys.c2


def updates_in(t, n_b, sys: SystemModel):
    return t / iter_time(n_b, sys)


def loss_after_time(t, n_b, sys: SystemModel) -> float:
    if not t > 0:
        raise ValueError("time must be positive")
    T = updates_in(t, n_b, sys)
    if T < 1:
        warnings.warn(f"only {T:.3g} updates fit in {t} s", ModelValidityWarning, stacklevel=2)
    return 1.0 / np.sqrt(n_b * T) + 1.0 / T


def time_for_loss(psi, n_b, sys: SystemModel):
    """Training time needed to reach loss ``psi``; vectorized over ``n_b``."""
    n_b = np.asarray(n_b, dtype=np.float64)
    if np.any(np.asarray(psi) <= 0):
        raise ValueError("target loss must be positive")
    if np.any(n_b <= 0):
        raise ValueError("batch size must be positive")
    a = np.sqrt((n_b + sys.c1 * sys.c2) / (n_b * sys.c1))
    b = n_b / sys.c1 + sys.c2
    root = (a + np.sqrt(a * a + 4.0 * psi * b)) / (2.0 * psi)
    t = root * root
    return float(t) if t.ndim == 0 else t


def time_curve(psi, sys: SystemModel, lo: int = 1, hi: int = 3000) -> tuple[np.ndarray, np.ndarray]:
    if lo < 1 or hi < lo:
        raise ValueError(f"invalid batch range [{lo}, {hi}]")
    grid = np.arange(lo, hi + 1)
    return grid, time_for_loss(psi, grid, sys)


def optimal_batch(psi, sys: SystemModel, lo: int = 1, hi: int = 3000) -> tuple[int, float]:
    """Integer batch size in ``[lo, hi]`` minimizing predicted time.

    Ties go to the smaller batch.
    """
    grid, t = time_curve(psi, sys, lo, hi)
    i = int(np.argmin(t))
    return int(grid[i]), float(t[i])
