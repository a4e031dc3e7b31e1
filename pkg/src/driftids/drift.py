"""ADWIN change detection over a bounded signal (exponential-histogram form)."""

from __future__ import annotations

import math

from .errors import OutOfRange

DEFAULT_DELTA = 0.002
WARNING_DELTA = 0.01


def cut_threshold(n0, n1, window_variance, delta_prime):
    """Mean difference two sub-windows must reach to be declared different."""
    m = 1.0 / (1.0 / n0 + 1.0 / n1)
    log_term = math.log(2.0 / delta_prime)
    return math.sqrt((2.0 / m) * window_variance * log_term) + (2.0 / (3.0 * m)) * log_term


class Adwin:
    """Adaptive window over values in [0, 1].

    Buckets live in rows; row ``i`` holds summaries of ``2**i`` samples,
    oldest first. Split checks run when the width is a multiple of
    ``clock`` (or via :meth:`check`); a detected change drops the oldest
    buckets until no split is significant.
    """

    __slots__ = ("delta", "max_buckets", "clock", "min_window", "width", "total",
                 "m2", "_sums", "_m2s", "n_detections", "_last_cut")

    def __init__(self, delta=DEFAULT_DELTA, max_buckets=5, clock=32, min_window=5):
        if not 0.0 < delta < 1.0:
            raise ValueError("delta must lie in (0, 1)")
        self.delta = delta
        self.max_buckets = max_buckets
        self.clock = clock
        self.min_window = min_window
        self.width = 0
        self.total = 0.0
        self.m2 = 0.0
        self._sums: list[list[float]] = []
        self._m2s: list[list[float]] = []
        self.n_detections = 0
        self._last_cut = 0

    # -- summary -------------------------------------------------------------
    @property
    def estimation(self) -> float:
        return self.total / self.width if self.width else 0.0

    @property
    def variance(self) -> float:
        return self.m2 / self.width if self.width else 0.0

    @property
    def n_buckets(self) -> int:
        return sum(len(row) for row in self._sums)

    def bucket_counts(self):
        return [1 << i for i, row in enumerate(self._sums) for _ in row]

    # -- update --------------------------------------------------------------
    def update(self, value) -> bool:
        """Append ``value``; True when the window was cut."""
        if not 0.0 <= value <= 1.0:
            raise OutOfRange(f"ADWIN input {value!r} outside [0, 1]")
        self._insert(float(value))
        if self.width % self.clock == 0:
            return self.check()
        return False

    def _insert(self, value):
        self.width += 1
        if self.width > 1:
            prev_mean = self.total / (self.width - 1)
            self.m2 += (self.width - 1) * (value - prev_mean) ** 2 / self.width
        self.total += value
        if not self._sums:
            self._sums.append([])
            self._m2s.append([])
        self._sums[0].append(value)
        self._m2s[0].append(0.0)
        self._compress()

    def _compress(self):
        limit = self.max_buckets
        sums, m2s = self._sums, self._m2s
        i = 0
        while i < len(sums) and len(sums[i]) > limit:
            n = 1 << i
            s1, s2 = sums[i].pop(0), sums[i].pop(0)
            v1, v2 = m2s[i].pop(0), m2s[i].pop(0)
            merged_m2 = v1 + v2 + n * n * (s1 / n - s2 / n) ** 2 / (2 * n)
            if i + 1 == len(sums):
                sums.append([])
                m2s.append([])
            sums[i + 1].append(s1 + s2)
            m2s[i + 1].append(merged_m2)
            i += 1

    def _drop_oldest(self):
        row = len(self._sums) - 1
        n = 1 << row
        s = self._sums[row].pop(0)
        v = self._m2s[row].pop(0)
        self.width -= n
        self.total -= s
        if self.width > 0:
            mean_rest = self.total / self.width
            self.m2 -= v + n * self.width * (s / n - mean_rest) ** 2 / (n + self.width)
            self.m2 = max(self.m2, 0.0)
        else:
            self.total = 0.0
            self.m2 = 0.0
        if not self._sums[row]:
            self._sums.pop()
            self._m2s.pop()

    def check(self) -> bool:
        """Test every bucket-boundary split; cut while one is significant."""
        if self.width <= self.min_window:
            return False
        cut_any = False
        while self._find_cut():
            self._drop_oldest()
            cut_any = True
        if cut_any:
            self.n_detections += 1
        return cut_any

    def _find_cut(self) -> bool:
        width = self.width
        if width < 2:
            return False
        variance = self.m2 / width
        delta_prime = self.delta / math.log(width) if width > 2 else self.delta
        log_term = math.log(2.0 / delta_prime)
        total = self.total
        min_n = self.min_window + 1
        n0 = 0
        s0 = 0.0
        sums = self._sums
        for row in range(len(sums) - 1, -1, -1):
            size = 1 << row
            bucket_row = sums[row]
            for k, s in enumerate(bucket_row):
                n0 += size
                s0 += s
                n1 = width - n0
                if row == 0 and k == len(bucket_row) - 1:
                    return False
                if n0 > min_n and n1 > min_n:
                    diff = abs(s0 / n0 - (total - s0) / n1)
                    inv_m = 1.0 / n0 + 1.0 / n1
                    eps = math.sqrt(2.0 * inv_m * variance * log_term) + (2.0 / 3.0) * inv_m * log_term
                    if diff >= eps:
                        return True
        return False

    def reset(self):
        self.__init__(self.delta, self.max_buckets, self.clock, self.min_window)

    def __repr__(self):
        return f"Adwin(delta={self.delta}, width={self.width}, mean={self.estimation:.4f})"
