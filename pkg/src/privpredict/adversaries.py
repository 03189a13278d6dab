"""Query-stream generators: offline/oblivious fixed lists, stochastic draws, and
adaptive strategies that read only the public (point, label) transcript.

Adaptive adversaries are pure functions of the public history plus their own
noise source, so feeding them anything beyond (x, Label) pairs is impossible
by construction.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import (
    ConfigurationError,
    DataDistribution,
    NoiseSource,
    Point,
    StreamExhausted,
    POSITIVE,
)

History = Sequence[tuple[Point, int]]


@dataclass(frozen=True)
class ObliviousAdversary:
    """Fixed query list revealed one point at a time, independent of any outputs."""

    points: tuple[Point, ...]

    def next_query(self, history: History, noise: NoiseSource) -> Point:
        j = len(history)
        if j >= len(self.points):
            raise StreamExhausted(f"fixed query list of length {len(self.points)} is exhausted")
        return self.points[j]

    def disclose(self) -> tuple[Point, ...] | None:
        return None


@dataclass(frozen=True)
class OfflineAdversary(ObliviousAdversary):
    """Oblivious stream plus a pre-run disclosure hook for analysis tooling.

    The disclosed list goes to measurement code only, never to the predictor.
    """

    def disclose(self) -> tuple[Point, ...] | None:
        return self.points


@dataclass(frozen=True)
class StochasticAdversary:
    """Queries drawn i.i.d. from the data distribution."""

    dist: DataDistribution

    def next_query(self, history: History, noise: NoiseSource) -> Point:
        return self.dist.sample_points(1, noise)[0]

    def disclose(self) -> tuple[Point, ...] | None:
        return None


class _IncrementalHistory:
    """Replay helper: deterministic state as a function of the consumed history.

    State is advanced incrementally while calls see the same history growing by
    appends; any prefix mismatch or shrink triggers a full replay, so the query
    stream stays a pure function of the (point, label) pairs.
    """

    def _reset(self) -> None:
        raise NotImplementedError

    def _consume(self, pair: tuple[Point, int]) -> None:
        raise NotImplementedError

    def _sync(self, history: History) -> None:
        if len(history) < self._seen or (
            self._seen > 0 and tuple(history[self._seen - 1]) != self._last_pair
        ):
            self._reset()
            self._seen = 0
            self._last_pair = None
        for i in range(self._seen, len(history)):
            self._consume(history[i])
        self._seen = len(history)
        if history:
            self._last_pair = tuple(history[-1])


class BisectionAdversary(_IncrementalHistory):
    """Adaptive threshold hunter: maintain an interval, always query its midpoint.

    A +1 answer moves the upper end down to the midpoint, a -1 answer moves the
    lower end just above it.
    """

    def __init__(self, low: int, high: int):
        self.low = int(low)
        self.high = int(high)
        self._seen = 0
        self._last_pair = None
        self._reset()

    def _reset(self) -> None:
        self._lo, self._hi = self.low, self.high

    def _consume(self, pair) -> None:
        _, label = pair
        mid = (self._lo + self._hi) // 2
        if label == POSITIVE:
            self._hi = mid
        else:
            self._lo = min(mid + 1, self._hi)

    def next_query(self, history: History, noise: NoiseSource) -> Point:
        self._sync(history)
        return (float((self._lo + self._hi) // 2),)

    def disclose(self) -> tuple[Point, ...] | None:
        return None


class BoundaryProbeAdversary(_IncrementalHistory):
    """Adaptive halfspace stressor: fit a running boundary estimate by perceptron
    updates on the observed (point, label) pairs, then query at distance tau from
    it, alternating sides."""

    def __init__(self, low, high, tau: float):
        self.low = tuple(float(c) for c in low)
        self.high = tuple(float(c) for c in high)
        self.tau = float(tau)
        self._lo_arr = np.asarray(self.low)
        self._hi_arr = np.asarray(self.high)
        self._seen = 0
        self._last_pair = None
        self._reset()

    def _reset(self) -> None:
        self._w = np.zeros(len(self.low) + 1)

    def _consume(self, pair) -> None:
        x, label = pair
        lifted = np.asarray(tuple(x) + (-1.0,))
        predicted = POSITIVE if float(self._w @ lifted) >= 0.0 else -POSITIVE
        if predicted != label:
            self._w = self._w + label * lifted

    def next_query(self, history: History, noise: NoiseSource) -> Point:
        self._sync(history)
        base = noise.rng.uniform(self._lo_arr, self._hi_arr)
        normal = self._w[:-1]
        norm = float(np.linalg.norm(normal))
        if norm == 0.0:
            return tuple(float(c) for c in base)
        on_boundary = base - ((float(normal @ base) - self._w[-1]) / norm**2) * normal
        side = 1.0 if len(history) % 2 == 0 else -1.0
        probe = on_boundary + side * self.tau * normal / norm
        probe = np.clip(probe, self._lo_arr, self._hi_arr)
        return tuple(float(c) for c in probe)

    def disclose(self) -> tuple[Point, ...] | None:
        return None


Adversary = (
    ObliviousAdversary | OfflineAdversary | StochasticAdversary | BisectionAdversary | BoundaryProbeAdversary
)


def load_query_csv(path) -> list[Point]:
    """Fixed query list from CSV, one point per row."""
    points: list[Point] = []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row:
                continue
            points.append(tuple(float(v) for v in row))
    if not points:
        raise ConfigurationError(f"no query points found in {path}")
    return points


def van_der_corput_queries(count: int, grid_size: int) -> list[Point]:
    """Deterministic bit-reversal sweep of {1..grid_size}: an oblivious stream that
    probes the grid at every dyadic scale."""
    if count < 1 or grid_size < 2:
        raise ConfigurationError("need count >= 1 and grid_size >= 2")
    bits = max(1, (grid_size - 1).bit_length())
    points: list[Point] = []
    j = 0
    while len(points) < count:
        rev = int(format(j % (2**bits), f"0{bits}b")[::-1], 2)
        x = 1 + (rev * grid_size) // (2**bits)
        if x <= grid_size:
            points.append((float(x),))
        j += 1
    return points
