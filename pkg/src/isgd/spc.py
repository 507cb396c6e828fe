"""Upper control chart over the last epoch of batch losses."""

from __future__ import annotations

import math
from collections import deque

from .errors import DivergenceError


class SpcWindow:
    """Fixed-capacity loss queue with running mean, std and control limit.

    Sums are kept relative to a shift point that is reset to the current
    mean once per ``capacity`` pushes, when the sums are also recomputed
    from the queue.  That bounds rounding drift and keeps each push O(1)
    amortized.  A refresh is also forced early when the variance falls far below the
    largest second moment accumulated since the last refresh, where the
    running sums would have lost their significant digits.  The standard deviation is the population one (divide by
    the window length).

    ``work`` counts queue elements touched, for cost assertions.
    """

    def __init__(self, capacity: int, k: float = 3.0):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        if not k > 0:
            raise ValueError("sigma multiplier must be positive")
        self.capacity = capacity
        self.k = float(k)
        self.queue: deque[float] = deque()
        self.count = 0
        self.work = 0
        self._shift = 0.0
        self._s = 0.0
        self._s2 = 0.0
        self._s2_peak = 0.0
        self._since_refresh = 0

    def __len__(self):
        return len(self.queue)

    @property
    def full(self) -> bool:
        return len(self.queue) == self.capacity

    @property
    def warm(self) -> bool:
        # limit covers a whole epoch of losses
        return self.full

    @property
    def mean(self) -> float:
        n = len(self.queue)
        return self._shift + self._s / n if n else 0.0

    @property
    def std(self) -> float:
        n = len(self.queue)
        if n == 0:
            return 0.0
        m = self._s / n
        return math.sqrt(max(self._s2 / n - m * m, 0.0))

    @property
    def limit(self) -> float:
        if math.isinf(self.k):
            return math.inf
        return self.mean + self.k * self.std

    def push(self, loss: float) -> None:
        loss = float(loss)
        if not math.isfinite(loss):
            raise DivergenceError(f"non-finite batch loss {loss}")
        if self.full:
            d = self.queue.popleft() - self._shift
            self._s -= d
            self._s2 -= d * d
            self.work += 1
        self.queue.append(loss)
        d = loss - self._shift
        self._s += d
        self._s2 += d * d
        self._s2_peak = max(self._s2_peak, self._s2)
        self.count += 1
        self.work += 1
        self._since_refresh += 1
        if self._since_refresh >= self.capacity or self._cancelling():
            self._refresh()

    def _cancelling(self) -> bool:
        # rounding in s2 scales with the largest s2 since the last refresh;
        # once the variance is 1e4 times smaller than that, recompute
        # (ulp-level residue around the shift is harmless and ignored)
        n = len(self.queue)
        var_n = self._s2 - self._s * self._s / n
        return (var_n < 1e-4 * self._s2_peak
                and self._s2_peak > 1e-24 * n * max(1.0, self._shift * self._shift))

    def _refresh(self):
        n = len(self.queue)
        self._shift = math.fsum(self.queue) / n
        devs = [x - self._shift for x in self.queue]
        self._s = math.fsum(devs)
        self._s2 = math.fsum(d * d for d in devs)
        self._s2_peak = self._s2
        self._since_refresh = 0
        self.work += 2 * n

    def is_undertrained(self, loss: float) -> bool:
        return self.warm and loss > self.limit

    def snapshot(self) -> tuple[float, float, float]:
        return self.mean, self.std, self.limit
