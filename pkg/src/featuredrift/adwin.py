"""ADWIN adaptive-windowing change detector (exponential-histogram variant).

The window is stored as buckets of capacity ``2**level``; each level keeps at
most ``max_buckets`` buckets before its two oldest are merged upward. A cut is
declared when two adjacent sub-windows (split on bucket boundaries) have
means further apart than the Hoeffding/Bernstein-style bound
``sqrt(2 m v d) + 2 m d / 3`` with ``d = ln(2 ln(n) / delta)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field


@dataclass
class _Level:
    totals: list[float] = field(default_factory=list)
    variances: list[float] = field(default_factory=list)


class Adwin:
    def __init__(self, delta: float = 0.002, max_buckets: int = 5, clock: int = 32,
                 min_window_length: int = 5, grace_period: int = 10):
        if not 0 < delta < 1:
            raise ValueError("delta must be in (0, 1)")
        if max_buckets < 2:
            raise ValueError("max_buckets must be >= 2")
        self.delta = delta
        self.max_buckets = max_buckets
        self.clock = clock
        self.min_window_length = min_window_length
        self.grace_period = grace_period
        self.levels: list[_Level] = []
        self.width = 0
        self.total = 0.0
        self.variance = 0.0  # sum of squared deviations from the window mean
        self.ticks = 0
        self.detections = 0

    @property
    def mean(self) -> float:
        return self.total / self.width if self.width else 0.0

    @property
    def window_variance(self) -> float:
        return self.variance / self.width if self.width else 0.0

    def bucket_counts(self) -> list[int]:
        return [len(lv.totals) << i for i, lv in enumerate(self.levels)]

    def update(self, value: float) -> bool:
        """Add ``value``; return True if the window was shrunk (change detected)."""
        value = float(value)
        if not math.isfinite(value):
            raise ValueError("ADWIN input must be finite")
        self._insert(value)
        self.ticks += 1
        changed = False
        if self.ticks % self.clock == 0 and self.width > self.grace_period:
            while self._find_cut():
                self._drop_oldest()
                changed = True
        if changed:
            self.detections += 1
        return changed

    def _insert(self, x: float) -> None:
        if not self.levels:
            self.levels.append(_Level())
        self.width += 1
        if self.width > 1:
            prev_mean = self.total / (self.width - 1)
            self.variance += (self.width - 1) * (x - prev_mean) ** 2 / self.width
        self.total += x
        self.levels[0].totals.append(x)
        self.levels[0].variances.append(0.0)
        self._compress()

    def _compress(self) -> None:
        i = 0
        while i < len(self.levels):
            lv = self.levels[i]
            if len(lv.totals) <= self.max_buckets:
                break
            if i + 1 == len(self.levels):
                self.levels.append(_Level())
            n = 1 << i
            t1, t2 = lv.totals.pop(0), lv.totals.pop(0)
            v1, v2 = lv.variances.pop(0), lv.variances.pop(0)
            d = t1 / n - t2 / n
            nxt = self.levels[i + 1]
            nxt.totals.append(t1 + t2)
            nxt.variances.append(v1 + v2 + n * n * d * d / (2 * n))
            i += 1

    def _drop_oldest(self) -> None:
        i = len(self.levels) - 1
        while i >= 0 and not self.levels[i].totals:
            i -= 1
        lv = self.levels[i]
        n1 = 1 << i
        t1 = lv.totals.pop(0)
        v1 = lv.variances.pop(0)
        self.width -= n1
        self.total -= t1
        if self.width == 0:
            self.total = 0.0
            self.variance = 0.0
        else:
            u1 = t1 / n1
            u0 = self.total / self.width
            self.variance -= v1 + n1 * self.width * (u1 - u0) ** 2 / (n1 + self.width)
            self.variance = max(self.variance, 0.0)
        while self.levels and not self.levels[-1].totals:
            self.levels.pop()

    def _iter_buckets_oldest_first(self):
        for i in range(len(self.levels) - 1, -1, -1):
            n = 1 << i
            for t in self.levels[i].totals:
                yield n, t

    def cut_threshold(self, n0: int, n1: int) -> float:
        d = math.log(2.0 * math.log(self.width) / self.delta)
        m = 1.0 / (n0 - self.min_window_length + 1) + 1.0 / (n1 - self.min_window_length + 1)
        v = self.window_variance
        return math.sqrt(2.0 * m * v * d) + 2.0 / 3.0 * d * m

    def _find_cut(self) -> bool:
        if self.width <= self.min_window_length * 2:
            return False
        n0, s0 = 0, 0.0
        for n, t in self._iter_buckets_oldest_first():
            n0 += n
            s0 += t
            n1 = self.width - n0
            if n1 < self.min_window_length:
                break
            if n0 < self.min_window_length:
                continue
            u0, u1 = s0 / n0, (self.total - s0) / n1
            if abs(u0 - u1) > self.cut_threshold(n0, n1):
                return True
        return False
