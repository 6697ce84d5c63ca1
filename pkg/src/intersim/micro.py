"""Microscopic vehicle interactions: equilibrium passing times per policy.

Two policies are implemented for arbitrary conflict graphs:

* FIFO: the passing order is fixed by desired arrival times.  Each new
  vehicle passes after all earlier conflicting vehicles, and earlier
  vehicles' passing times never change.

* Flexible order (FO): the order is recomputed at every event.  The new
  vehicle's earliest feasible time (its desired time, floored by same-lane
  predecessors plus the same-lane gap) is ranked together with the current
  passing times of all earlier vehicles; times are then reassigned in rank
  order, each vehicle keeping its previous time as a floor.  Vehicles from
  the same lane tend to group and pass together.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .core import IntersectionSpec, clamp_delays


@dataclass(frozen=True)
class VehicleRecord:
    """One vehicle: 1-based index, desired passing time (s), 1-indexed lane."""

    index: int
    desired_time: float
    lane: int


@dataclass
class EquilibriumResult:
    """Equilibrium passing times for a vehicle sequence.

    ``order`` is the rank of each vehicle in the final passing order under
    FO (1-based, position j holds the rank of vehicle j); ``None`` under
    FIFO where the order is the arrival order.
    """

    passing_times: np.ndarray
    desired_times: np.ndarray
    lanes: np.ndarray
    order: Optional[np.ndarray] = None


def _as_arrays(vehicles: Sequence[VehicleRecord]) -> tuple[np.ndarray, np.ndarray]:
    t_star = np.array([v.desired_time for v in vehicles], dtype=float)
    lanes = np.array([v.lane for v in vehicles], dtype=np.int64)
    if len(t_star) == 0:
        raise ValueError("empty vehicle sequence")
    if np.any(np.diff(t_star) < 0):
        raise ValueError("vehicles must be sorted by desired time")
    return t_star, lanes


def fifo_equilibrium(vehicles: Sequence[VehicleRecord],
                     spec: IntersectionSpec) -> EquilibriumResult:
    """Sequential FIFO assignment: t_j = max(desired, conflicts + gaps).

    Each vehicle's time is the max of its desired time, the latest prior
    conflicting-lane time plus delta_d, and the latest prior same-lane time
    plus delta_s.  Earlier vehicles are never revisited.
    """
    t_star, lanes = _as_arrays(vehicles)
    n = len(t_star)
    conflict = spec.conflict_matrix()
    tbar = np.empty(n)
    # running max passing time per lane; -inf marks an empty lane
    lane_max = np.full(spec.lane_count, -np.inf)
    for i in range(n):
        k = lanes[i] - 1
        t = t_star[i]
        if lane_max[k] > -np.inf:
            t = max(t, lane_max[k] + spec.delta_s)
        for j in np.flatnonzero(conflict[k]):
            if lane_max[j] > -np.inf:
                t = max(t, lane_max[j] + spec.delta_d)
        tbar[i] = t
        lane_max[k] = max(lane_max[k], t)
    return EquilibriumResult(tbar, t_star, lanes, order=None)


def _fo_insert(tbar: np.ndarray, lanes: np.ndarray, entrant_cand: float,
               entrant_lane: int, spec: IntersectionSpec,
               conflict: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """One FO event step: rank existing times with the entrant candidate and
    reassign in rank order.  Returns (new times, ranks) for the extended
    sequence.  ``tbar`` holds the previous step's times for vehicles 1..i-1.
    """
    cands = np.append(tbar, entrant_cand)
    all_lanes = np.append(lanes, entrant_lane)
    # ascending sort, ties broken by vehicle index (stable sort)
    q = np.argsort(cands, kind="stable")
    new = np.empty_like(cands)
    lane_max = np.full(spec.lane_count, -np.inf)
    for pos in range(len(q)):
        j = q[pos]
        k = all_lanes[j] - 1
        t = cands[j]
        if lane_max[k] > -np.inf:
            t = max(t, lane_max[k] + spec.delta_s)
        for c in np.flatnonzero(conflict[k]):
            if lane_max[c] > -np.inf:
                t = max(t, lane_max[c] + spec.delta_d)
        new[j] = t
        lane_max[k] = max(lane_max[k], t)
    ranks = np.empty(len(q), dtype=np.int64)
    ranks[q] = np.arange(1, len(q) + 1)
    return new, ranks


def fo_equilibrium(vehicles: Sequence[VehicleRecord],
                   spec: IntersectionSpec) -> EquilibriumResult:
    """Replay events one vehicle at a time under the flexible-order policy.

    At step i the entrant's candidate time is
    max(desired, latest same-lane time + delta_s); all i candidate times
    (existing vehicles keep their current times as candidates) are sorted
    ascending with ties broken by index, then reassigned in that order with
    the previous times acting as floors.  The full sequence is always
    computed by replay, never by a single batch sort.
    """
    t_star, lanes = _as_arrays(vehicles)
    n = len(t_star)
    conflict = spec.conflict_matrix()
    tbar = np.empty(0)
    ranks = np.empty(0, dtype=np.int64)
    for i in range(n):
        cand = t_star[i]
        same = np.flatnonzero(lanes[:i] == lanes[i])
        if same.size:
            cand = max(cand, tbar[same].max() + spec.delta_s)
        tbar, ranks = _fo_insert(tbar, lanes[:i], cand, lanes[i], spec, conflict)
    return EquilibriumResult(tbar, t_star, lanes, order=ranks)


def lane_delays(result: EquilibriumResult, spec: IntersectionSpec) -> np.ndarray:
    """Per-lane delay state: latest passing time in each lane minus the
    newest vehicle's desired time, clamped at -delta_d.  Lanes with no
    vehicles yet sit at the clamp floor -delta_d (a vehicle arbitrarily far
    in the past)."""
    t_now = result.desired_times[-1]
    delays = np.full(spec.lane_count, -spec.delta_d, dtype=float)
    for k in range(1, spec.lane_count + 1):
        mask = result.lanes == k
        if mask.any():
            delays[k - 1] = result.passing_times[mask].max() - t_now
    return clamp_delays(delays, spec)


def event_delay(before: EquilibriumResult, after: EquilibriumResult) -> float:
    """Scalar delay introduced by the newest event: the total shift of all
    earlier vehicles' passing times plus the entrant's own delay.

    Non-negative under FIFO (earlier times never move).  Under FO single
    terms can be negative because the entrant may pass earlier than
    existing vehicles; the value is reported as computed.
    """
    n = len(before.passing_times)
    if len(after.passing_times) != n + 1:
        raise ValueError("'after' must extend 'before' by exactly one vehicle")
    if not np.array_equal(before.desired_times, after.desired_times[:n]):
        raise ValueError("mismatched vehicle sequences")
    shift = float(np.sum(after.passing_times[:n] - before.passing_times))
    own = float(after.passing_times[n] - after.desired_times[n])
    return shift + own
