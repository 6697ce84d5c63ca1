"""Domain types and the Poisson arrival stream shared by the whole package.

An intersection is described by a conflict graph over its incoming lanes,
two temporal gap parameters (cross-lane and same-lane headway) and per-lane
Poisson flow rates.  Vehicles arrive on a merged Poisson stream: the gap
between consecutive arrivals is exponential with the total rate, and the
lane of each arrival is categorical with probability proportional to the
lane rate.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np


class SpecError(ValueError):
    """Invalid intersection specification."""


@dataclass(frozen=True)
class IntersectionSpec:
    """Static description of an unmanaged intersection.

    Lanes are 1-indexed in all interfaces.  ``conflicts`` holds unordered
    lane pairs whose paths intersect; a lane never conflicts with itself.
    ``delta_d`` is the minimum temporal gap between vehicles from
    conflicting lanes, ``delta_s`` the gap between vehicles from the same
    lane.  The two are independent parameters.
    """

    lane_count: int
    conflicts: frozenset[tuple[int, int]]
    delta_d: float
    delta_s: float
    lane_rates: tuple[float, ...]

    def __post_init__(self):
        validate_spec(self)

    @property
    def total_rate(self) -> float:
        return float(sum(self.lane_rates))

    @property
    def lane_probs(self) -> np.ndarray:
        rates = np.asarray(self.lane_rates, dtype=float)
        return rates / rates.sum()

    def conflict_matrix(self) -> np.ndarray:
        """Symmetric boolean K x K matrix of the conflict graph (0-indexed)."""
        mat = np.zeros((self.lane_count, self.lane_count), dtype=bool)
        for a, b in self.conflicts:
            mat[a - 1, b - 1] = True
            mat[b - 1, a - 1] = True
        return mat

    def conflicting_lanes(self, lane: int) -> tuple[int, ...]:
        """Lanes (1-indexed) in conflict with ``lane``."""
        out = []
        for a, b in self.conflicts:
            if a == lane:
                out.append(b)
            elif b == lane:
                out.append(a)
        return tuple(sorted(out))

    @classmethod
    def two_lane(cls, rate1: float, rate2: float,
                 delta_d: float, delta_s: float) -> "IntersectionSpec":
        """The two-lane merging intersection used throughout the case studies."""
        return cls(
            lane_count=2,
            conflicts=frozenset({(1, 2)}),
            delta_d=delta_d,
            delta_s=delta_s,
            lane_rates=(rate1, rate2),
        )

    @classmethod
    def from_json(cls, path_or_text) -> "IntersectionSpec":
        """Load a spec from a JSON document.

        Expected keys: ``lane_count`` (int), ``conflicts`` (list of
        ``[i, j]`` 1-indexed lane pairs), ``delta_d``, ``delta_s``
        (seconds), ``lane_rates`` (list of per-lane rates, 1/s).
        """
        if hasattr(path_or_text, "read"):
            doc = json.load(path_or_text)
        else:
            text = str(path_or_text)
            if text.lstrip().startswith("{"):
                doc = json.loads(text)
            else:
                with open(text) as fh:
                    doc = json.load(fh)
        try:
            return cls(
                lane_count=int(doc["lane_count"]),
                conflicts=frozenset(
                    tuple(sorted((int(a), int(b)))) for a, b in doc["conflicts"]
                ),
                delta_d=float(doc["delta_d"]),
                delta_s=float(doc["delta_s"]),
                lane_rates=tuple(float(r) for r in doc["lane_rates"]),
            )
        except KeyError as exc:
            raise SpecError(f"missing key in intersection JSON: {exc}") from exc

    def to_json(self) -> str:
        return json.dumps(
            {
                "lane_count": self.lane_count,
                "conflicts": sorted(list(p) for p in self.conflicts),
                "delta_d": self.delta_d,
                "delta_s": self.delta_s,
                "lane_rates": list(self.lane_rates),
            },
            indent=2,
        )


def validate_spec(spec: IntersectionSpec) -> IntersectionSpec:
    """Check all spec invariants; raise SpecError with a specific diagnostic."""
    if spec.lane_count < 1:
        raise SpecError("lane_count must be a positive integer")
    if len(spec.lane_rates) != spec.lane_count:
        raise SpecError(
            f"expected {spec.lane_count} lane rates, got {len(spec.lane_rates)}"
        )
    for pair in spec.conflicts:
        a, b = pair
        if a == b:
            raise SpecError(f"lane {a} conflicts with itself")
        if not (1 <= a <= spec.lane_count and 1 <= b <= spec.lane_count):
            raise SpecError(f"conflict pair {pair} references an unknown lane")
    if spec.delta_d < 0:
        raise SpecError("delta_d must be >= 0")
    if spec.delta_s < 0:
        raise SpecError("delta_s must be >= 0")
    for k, rate in enumerate(spec.lane_rates, start=1):
        if rate < 0:
            raise SpecError(f"lane {k} has negative rate {rate}")
    if sum(spec.lane_rates) <= 0:
        raise SpecError("total flow rate must be > 0")
    return spec


@dataclass(frozen=True)
class ArrivalEvent:
    """One event: the arrival of a new vehicle.

    ``gap`` is the inter-arrival time (seconds, strictly positive) between
    this vehicle's desired passing time and the previous one's; ``lane``
    is the 1-indexed lane of the new vehicle.
    """

    gap: float
    lane: int

    def __post_init__(self):
        if self.gap <= 0:
            raise ValueError("arrival gap must be strictly positive")


def clamp_delays(delays: np.ndarray, spec: IntersectionSpec) -> np.ndarray:
    """Lower-clamp a delay vector at -delta_d (the state-space floor)."""
    return np.maximum(delays, -spec.delta_d)


def sample_event(rng: np.random.Generator, spec: IntersectionSpec) -> ArrivalEvent:
    """Draw one arrival from the merged Poisson stream.

    The gap is Exponential(total rate); the lane is categorical with
    P(lane = k) proportional to the lane rate.  Zero-rate lanes are never
    selected.
    """
    gap = rng.exponential(1.0 / spec.total_rate)
    cum = np.cumsum(spec.lane_probs)
    lane = int(np.searchsorted(cum, rng.random(), side="right")) + 1
    lane = min(lane, spec.lane_count)
    return ArrivalEvent(gap=gap, lane=lane)


class EventStream:
    """Reproducible lazy stream of arrival events for a given (seed, spec).

    Gaps and lanes are drawn from two independent child generators spawned
    from the seed, so the sequence is identical whether events are taken
    one at a time or in blocks.
    """

    def __init__(self, seed: int, spec: IntersectionSpec):
        self.seed = int(seed)
        self.spec = spec
        ss = np.random.SeedSequence(self.seed)
        gap_ss, lane_ss = ss.spawn(2)
        self._gap_rng = np.random.default_rng(gap_ss)
        self._lane_rng = np.random.default_rng(lane_ss)
        self._cum = np.cumsum(spec.lane_probs)

    def take(self, n: int) -> tuple[np.ndarray, np.ndarray]:
        """Next ``n`` events as (gaps, lanes) arrays; lanes are 1-indexed."""
        gaps = self._gap_rng.exponential(1.0 / self.spec.total_rate, size=n)
        u = self._lane_rng.random(n)
        lanes = np.searchsorted(self._cum, u, side="right") + 1
        lanes = np.minimum(lanes, self.spec.lane_count)
        return gaps, lanes.astype(np.int64)

    def __iter__(self) -> Iterator[ArrivalEvent]:
        while True:
            gaps, lanes = self.take(1)
            yield ArrivalEvent(gap=float(gaps[0]), lane=int(lanes[0]))
