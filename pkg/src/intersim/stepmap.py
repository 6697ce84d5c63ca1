"""Closed-form one-event transition maps of the delay state.

For the two-lane intersection the delay vector (T1, T2) evolves through a
piecewise-linear map per arrival: four smooth pieces under FIFO, eight
under FO.  Both maps are stated for an ego-lane-1 event; lane-2 events are
obtained by swapping the two components.  Outputs are lower-clamped at
-delta_d; the ego component of the event's lane is always >= 0.

Region ids follow the row numbering of the map tables.  Id 0 marks the FO
fallback: a thin band (cross-lane difference between delta_d + delta_s and
gap + delta_d + delta_s, with the ego lane busy) is not covered by any of
the eight printed rows; such states are resolved by a direct one-step
re-ranking of the two lanes' latest passing times and counted separately
rather than being forced into a row.

A general-K FIFO map is also provided; a general-K FO closed form is not
derived, so K > 2 FO propagation falls back to equilibrium replay (see
:mod:`intersim.ensemble`).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .core import ArrivalEvent, IntersectionSpec, clamp_delays

FALLBACK_REGION = 0


@dataclass(frozen=True)
class RegionLabel:
    """Which smooth component of a policy's transition map was applied."""

    policy: str  # "fifo" | "fo"
    id: int      # 1-4 for fifo, 1-8 for fo, 0 for the fo fallback sliver

    def __post_init__(self):
        limit = 4 if self.policy == "fifo" else 8
        if not (0 <= self.id <= limit):
            raise ValueError(f"region id {self.id} out of range for {self.policy}")


def _require_two_lane(spec: IntersectionSpec):
    if spec.lane_count != 2:
        raise ValueError("closed-form step maps require a two-lane intersection")


@njit(cache=True)
def _fifo_core(t1: float, t2: float, x: float, dd: float, ds: float):
    """FIFO map for an ego-lane-1 event, before clamping.

    Returns (new_t1, new_t2, region, d) with d the scalar delay introduced
    by the event.  Overlapping strict/weak boundaries are resolved by the
    lower region id.
    """
    if t2 < x - dd:
        if t1 < x - ds:
            region, n1 = 1, 0.0
        else:
            region, n1 = 2, t1 + ds - x
    elif t2 <= t1:
        region, n1 = 3, t1 + ds - x
    else:
        region, n1 = 4, t2 + dd - x
    n2 = t2 - x
    # Eq. for the per-event scalar delay, evaluated before clamping: the
    # other lane's term (n2 - t2 + x) telescopes to zero under FIFO.
    return n1, n2, region, n1


@njit(cache=True)
def _fo_fallback(t1: float, t2: float, x: float, dd: float, ds: float):
    """Direct FO one-step re-ranking of the two latest passing times.

    Times are relative to the previous newest desired time; the entrant
    desires x on lane 1.  Covers the band missed by the printed rows (and
    any state outside the reachable set).
    """
    cand = max(x, t1 + ds)
    if cand < t2:
        # entrant ranks before the latest lane-2 vehicle
        new_ego = cand
        new_other = max(t2, new_ego + dd)
    else:
        new_ego = max(cand, t2 + dd)
        new_other = t2
    n1, n2 = new_ego - x, new_other - x
    return n1, n2, FALLBACK_REGION, n1 + (n2 - t2 + x)


@njit(cache=True)
def _fo_core(t1: float, t2: float, x: float, dd: float, ds: float):
    """FO map for an ego-lane-1 event, before clamping.

    Rows 1-4 coincide with the FIFO map (entrant passes last); rows 5-8
    cover the cases where the entrant passes before the latest vehicle in
    the other lane.  Returns (new_t1, new_t2, region, d).
    """
    if t2 < x - dd:
        if t1 < x - ds:
            region, n1, n2 = 1, 0.0, t2 - x
        else:
            region, n1, n2 = 2, t1 + ds - x, t2 - x
    elif t2 <= t1:
        region, n1, n2 = 3, t1 + ds - x, t2 - x
    elif t2 < x:
        region, n1, n2 = 4, t2 + dd - x, t2 - x
    elif t1 < x - ds:
        if t2 < x + dd:
            region, n1, n2 = 5, 0.0, dd            # other lane pushed behind entrant
        else:
            region, n1, n2 = 7, 0.0, t2 - x        # other lane unaffected
    elif dd <= t2 - t1 <= dd + ds:
        region, n1 = 6, t1 - x + ds
        n2 = n1 + dd                               # other lane pushed
    elif t2 - t1 > x + dd + ds:
        region, n1, n2 = 8, t1 - x + ds, t2 - x
    else:
        return _fo_fallback(t1, t2, x, dd, ds)
    return n1, n2, region, n1 + (n2 - t2 + x)


def _oriented(T, event_lane: int):
    t1, t2 = float(T[0]), float(T[1])
    return (t1, t2) if event_lane == 1 else (t2, t1)


def _step2(T, event: ArrivalEvent, spec: IntersectionSpec, policy: str):
    _require_two_lane(spec)
    if event.lane not in (1, 2):
        raise ValueError(f"lane {event.lane} out of range")
    t1, t2 = _oriented(T, event.lane)
    core = _fifo_core if policy == "fifo" else _fo_core
    n1, n2, region, d = core(t1, t2, event.gap, spec.delta_d, spec.delta_s)
    out = np.array([n1, n2] if event.lane == 1 else [n2, n1])
    return clamp_delays(out, spec), RegionLabel(policy, region), d


def fifo_step(T, event: ArrivalEvent,
              spec: IntersectionSpec) -> tuple[np.ndarray, RegionLabel]:
    """Advance a two-lane delay state by one event under FIFO."""
    out, label, _ = _step2(T, event, spec, "fifo")
    return out, label


def fo_step(T, event: ArrivalEvent,
            spec: IntersectionSpec) -> tuple[np.ndarray, RegionLabel]:
    """Advance a two-lane delay state by one event under flexible order."""
    out, label, _ = _step2(T, event, spec, "fo")
    return out, label


def step_with_delay(T, event: ArrivalEvent, spec: IntersectionSpec,
                    policy: str) -> tuple[np.ndarray, RegionLabel, float]:
    """Like fifo_step/fo_step but also returns the per-event scalar delay."""
    return _step2(T, event, spec, policy)


def classify_region(T, x: float, lane: int, spec: IntersectionSpec,
                    policy: str) -> RegionLabel:
    """Return the map region containing (T, x) for the given ego lane.

    On region boundaries the maps agree, so the label is a convention:
    ties on the other-lane threshold (T2 = x - delta_d) resolve to the
    occupied branch, ties on T2 = T1 to the same-lane branch.  FO states
    falling in the uncovered band come back with id 0.
    """
    _require_two_lane(spec)
    t1, t2 = _oriented(T, lane)
    core = _fifo_core if policy == "fifo" else _fo_core
    _, _, region, _ = core(t1, t2, x, spec.delta_d, spec.delta_s)
    return RegionLabel(policy, region)


def fifo_step_general(T, event: ArrivalEvent,
                      spec: IntersectionSpec) -> np.ndarray:
    """FIFO transition for an arbitrary conflict graph.

    The ego lane s receives max(0, T[s] + delta_s - x, max over lanes
    conflicting with s of T + delta_d - x); every other lane drifts down by
    the gap.  Reduces exactly to the two-lane FIFO map for K = 2.
    """
    if not (1 <= event.lane <= spec.lane_count):
        raise ValueError(f"lane {event.lane} out of range")
    T = np.asarray(T, dtype=float)
    x = event.gap
    s = event.lane - 1
    ego = max(0.0, T[s] + spec.delta_s - x)
    for j in spec.conflicting_lanes(event.lane):
        ego = max(ego, T[j - 1] + spec.delta_d - x)
    out = T - x
    out[s] = ego
    return clamp_delays(out, spec)


# ---------------------------------------------------------------------------
# Vectorized kernels over particle ensembles (two-lane only).
# ---------------------------------------------------------------------------

def _fifo_batch(t1, t2, x, dd, ds):
    """Vectorized FIFO core for ego-lane-1 events.  Arrays in, arrays out."""
    far2 = t2 < x - dd
    r1 = far2 & (t1 < x - ds)
    r2 = far2 & ~r1
    r3 = ~far2 & (t2 <= t1)
    r4 = ~far2 & (t2 > t1)
    n1 = np.select([r1, r2 | r3, r4], [0.0, t1 + ds - x, t2 + dd - x])
    n2 = t2 - x
    region = np.select([r1, r2, r3, r4], [1, 2, 3, 4]).astype(np.int64)
    return n1, n2, region, n1.copy()


def _fo_batch(t1, t2, x, dd, ds):
    """Vectorized FO core for ego-lane-1 events.

    The rare fallback-band states are resolved element-wise through the
    scalar fallback path.
    """
    diff = t2 - t1
    far2 = t2 < x - dd
    r1 = far2 & (t1 < x - ds)
    r2 = far2 & (t1 >= x - ds)
    r3 = ~far2 & (t2 <= t1)
    rest = ~far2 & (t2 > t1)
    r4 = rest & (t2 < x)
    later = rest & (t2 >= x)
    free = later & (t1 < x - ds)
    r5 = free & (t2 < x + dd)
    r7 = free & (t2 >= x + dd)
    busy = later & (t1 >= x - ds)
    r6 = busy & (diff >= dd) & (diff <= dd + ds)
    r8 = busy & ~r6 & (diff > x + dd + ds)
    fb = busy & ~r6 & ~r8

    n1 = np.select(
        [r1 | r5 | r7, r2 | r3 | r6 | r8, r4],
        [0.0, t1 + ds - x, t2 + dd - x],
    )
    n2 = np.select(
        [r1 | r2 | r3 | r4 | r7 | r8, r5, r6],
        [t2 - x, dd, t1 + ds + dd - x],
    )
    region = np.select(
        [r1, r2, r3, r4, r5, r6, r7, r8],
        [1, 2, 3, 4, 5, 6, 7, 8],
    ).astype(np.int64)
    for i in np.flatnonzero(fb):
        n1[i], n2[i], _, _ = _fo_fallback(t1[i], t2[i], x[i], dd, ds)
    return n1, n2, region, n1 + (n2 - t2 + x)


def step_batch(states: np.ndarray, gaps: np.ndarray, lanes: np.ndarray,
               spec: IntersectionSpec, policy: str):
    """Advance N two-lane delay states, each by its own event.

    ``states`` is (N, 2); ``gaps`` and ``lanes`` are length N.  Returns
    (new states clamped, region ids with 0 marking fallback, per-event
    scalar delays).
    """
    _require_two_lane(spec)
    dd, ds = spec.delta_d, spec.delta_s
    ego = np.where(lanes == 1, states[:, 0], states[:, 1])
    oth = np.where(lanes == 1, states[:, 1], states[:, 0])
    batch = _fifo_batch if policy == "fifo" else _fo_batch
    n_ego, n_oth, region, d = batch(ego, oth, gaps, dd, ds)
    out = np.empty_like(states)
    is1 = lanes == 1
    out[:, 0] = np.where(is1, n_ego, n_oth)
    out[:, 1] = np.where(is1, n_oth, n_ego)
    return clamp_delays(out, spec), region, d
