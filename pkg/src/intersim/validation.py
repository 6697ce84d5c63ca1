"""Brute-force cross-validation harness.

The closed-form step maps are checked against an independent oracle: the
full-sequence equilibrium recomputation of the microscopic policies,
replayed event by event.  The oracle never touches the step-map code path;
for two-lane streams it runs in a compiled kernel so long parameter sweeps
stay cheap.  A second comparison pits the event-driven simulation against
the closed-form steady state, and a third runs both policies on common
random numbers.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from numba import njit

from .core import EventStream, IntersectionSpec
from .ensemble import (histogram, init_ensemble, mean_total_delay, propagate,
                       run_to_steady_state)
from .stepmap import _fifo_core, _fo_core
from . import steady_state as ss


@dataclass
class Metric:
    """One compared quantity; ``passed`` mirrors |a - b| <= tolerance."""

    name: str
    value_a: float
    value_b: float
    tolerance: float
    passed: bool = field(init=False)

    def __post_init__(self):
        self.passed = abs(self.value_a - self.value_b) <= self.tolerance


@dataclass
class ValidationReport:
    scenario: str
    params: dict
    metrics: list[Metric]
    fallback_count: int = 0
    notes: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(m.passed for m in self.metrics)

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "params": self.params,
            "passed": self.passed,
            "fallback_count": self.fallback_count,
            "notes": self.notes,
            "metrics": [
                {
                    "name": m.name,
                    "value_a": m.value_a,
                    "value_b": m.value_b,
                    "tolerance": m.tolerance,
                    "passed": m.passed,
                }
                for m in self.metrics
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def to_text(self) -> str:
        lines = [f"[{'PASS' if self.passed else 'FAIL'}] {self.scenario}"]
        lines.append(f"  params: {self.params}")
        if self.fallback_count:
            lines.append(f"  region fallbacks: {self.fallback_count}")
        for note in self.notes:
            lines.append(f"  note: {note}")
        for m in self.metrics:
            flag = "ok " if m.passed else "FAIL"
            lines.append(
                f"  {flag} {m.name}: {m.value_a:.6g} vs {m.value_b:.6g}"
                f" (tol {m.tolerance:g})"
            )
        return "\n".join(lines)


@njit(cache=True)
def _two_lane_replay(gaps, lanes, dd, ds, fo):  # pragma: no cover - compiled
    """Equilibrium replay of a two-lane event stream.

    gaps[0] is ignored; vehicle 1 arrives at time 0.  Returns the lane
    delay vector after each event and the per-event scalar delay.  Vehicles
    trailing the newest desired time by more than dd + ds are dropped from
    the active set; they can no longer interact.
    """
    n = gaps.shape[0]
    traj = np.empty((n, 2))
    dvals = np.empty(n)
    # active vehicles sorted ascending by passing time (exact under FO for
    # two conflicting lanes because every pair is gap-constrained)
    act_t = np.empty(n)
    act_lane = np.empty(n, np.int64)
    lo = 0
    hi = 0
    t_star = 0.0
    for i in range(n):
        if i > 0:
            t_star += gaps[i]
        s = lanes[i]
        # entrant candidate: desired time floored by same-lane predecessor
        cand = t_star
        for j in range(hi - 1, lo - 1, -1):
            if act_lane[j] == s:
                if act_t[j] + ds > cand:
                    cand = act_t[j] + ds
                break
        if fo:
            # insert at the sorted position (ties: entrant has the largest
            # index, so it goes after equal times), then reassign suffix
            pos = hi
            while pos > lo and act_t[pos - 1] > cand:
                pos -= 1
            for j in range(hi, pos, -1):
                act_t[j] = act_t[j - 1]
                act_lane[j] = act_lane[j - 1]
            act_t[pos] = cand
            act_lane[pos] = s
            hi += 1
            # running per-lane maxima over the prefix
            m1 = -1.0e300
            m2 = -1.0e300
            for j in range(lo, pos):
                if act_lane[j] == 1:
                    m1 = act_t[j]
                else:
                    m2 = act_t[j]
            shift = 0.0
            for j in range(pos, hi):
                t = act_t[j]
                if act_lane[j] == 1:
                    if m1 + ds > t:
                        t = m1 + ds
                    if m2 + dd > t:
                        t = m2 + dd
                    m1 = t
                else:
                    if m2 + ds > t:
                        t = m2 + ds
                    if m1 + dd > t:
                        t = m1 + dd
                    m2 = t
                if j == pos:
                    dvals[i] = t - t_star
                else:
                    shift += t - act_t[j]
                act_t[j] = t
            dvals[i] += shift
        else:
            # FIFO: the entrant goes last and nobody else moves
            t = cand
            for j in range(hi - 1, lo - 1, -1):
                if act_lane[j] != s:
                    if act_t[j] + dd > t:
                        t = act_t[j] + dd
                    break
            act_t[hi] = t
            act_lane[hi] = s
            hi += 1
            dvals[i] = t - t_star
        # drop vehicles that can no longer interact
        while lo < hi and act_t[lo] < t_star - dd - ds:
            lo += 1
        # lane delays, clamped at the floor
        d1 = -dd
        d2 = -dd
        for j in range(lo, hi):
            if act_lane[j] == 1:
                d1 = act_t[j] - t_star
            else:
                d2 = act_t[j] - t_star
        traj[i, 0] = d1 if d1 > -dd else -dd
        traj[i, 1] = d2 if d2 > -dd else -dd
        # compact the buffer when the dead prefix dominates
        if lo > n // 2:
            for j in range(lo, hi):
                act_t[j - lo] = act_t[j]
                act_lane[j - lo] = act_lane[j]
            hi -= lo
            lo = 0
    return traj, dvals


def oracle_trajectory(gaps: np.ndarray, lanes: np.ndarray,
                      spec: IntersectionSpec, policy: str):
    """Lane-delay trajectory and per-event delays by equilibrium replay.

    Event 1 initializes the stream (its gap is ignored); the returned
    trajectory row i is the delay state after event i+1... row 0 is the
    state right after the first arrival.
    """
    if spec.lane_count != 2:
        raise ValueError("the compiled oracle supports two-lane specs; use "
                         "micro.fo_equilibrium for general graphs")
    gaps = np.ascontiguousarray(gaps, dtype=np.float64)
    lanes = np.ascontiguousarray(lanes, dtype=np.int64)
    return _two_lane_replay(gaps, lanes, float(spec.delta_d),
                            float(spec.delta_s), policy == "fo")


def mapping_trajectory(gaps: np.ndarray, lanes: np.ndarray,
                       spec: IntersectionSpec, policy: str):
    """Same trajectory through the closed-form step maps.

    Returns (trajectory, per-event delays, fallback count).  The first
    event sets the initial corner state (0 in its lane, -delta_d in the
    other); each later event applies the piecewise map.
    """
    gaps = np.ascontiguousarray(gaps, dtype=np.float64)
    lanes = np.ascontiguousarray(lanes, dtype=np.int64)
    return _map_replay(gaps, lanes, float(spec.delta_d),
                       float(spec.delta_s), policy == "fo")


@njit(cache=True)
def _map_replay(gaps, lanes, dd, ds, fo):
    n = gaps.size
    traj = np.empty((n, 2))
    dvals = np.zeros(n)
    t1, t2 = -dd, -dd
    if lanes[0] == 1:
        t1 = 0.0
    else:
        t2 = 0.0
    traj[0, 0] = t1
    traj[0, 1] = t2
    fallbacks = 0
    for i in range(1, n):
        x = gaps[i]
        if lanes[i] == 1:
            a, b = t1, t2
        else:
            a, b = t2, t1
        if fo:
            na, nb, region, d = _fo_core(a, b, x, dd, ds)
        else:
            na, nb, region, d = _fifo_core(a, b, x, dd, ds)
        if region == 0:
            fallbacks += 1
        na = max(na, -dd)
        nb = max(nb, -dd)
        if lanes[i] == 1:
            t1, t2 = na, nb
        else:
            t1, t2 = nb, na
        traj[i, 0] = t1
        traj[i, 1] = t2
        dvals[i] = d
    return traj, dvals, fallbacks


def compare_mapping_vs_oracle(spec: IntersectionSpec, policy: str,
                              stream_length: int = 200, trials: int = 100,
                              seed: int = 0,
                              tolerance: float = 1e-9) -> ValidationReport:
    """Closed-form step maps vs equilibrium-replay oracle on random streams.

    The pass/fail metric is the max componentwise discrepancy of the delay
    state over all trials.  The per-event scalar-delay gap is reported as
    an informational metric only: the map computes the macroscopic per-lane
    form while the oracle sums every vehicle's shift, and the two coincide
    only when no more than one vehicle per lane moves in an event.

    Known model limitation: under FO with delta_s > 0 the two-lane delay
    state is not a sufficient statistic for the replay dynamics (a queued
    vehicle delta_s behind the latest one in the other lane can block the
    entrant), so the state metric genuinely diverges there; a note is
    attached when that configuration fails.
    """
    if spec.lane_count != 2:
        raise ValueError("two-lane spec required")
    worst_state = 0.0
    worst_delay = 0.0
    fallbacks = 0
    for trial in range(trials):
        stream = EventStream(seed + trial, spec)
        gaps, lanes = stream.take(stream_length)
        map_traj, map_d, fb = mapping_trajectory(gaps, lanes, spec, policy)
        orc_traj, orc_d = oracle_trajectory(gaps, lanes, spec, policy)
        fallbacks += fb
        worst_state = max(worst_state,
                          float(np.abs(map_traj - orc_traj).max()))
        worst_delay = max(worst_delay,
                          float(np.abs(map_d[1:] - orc_d[1:]).max()))
    report = ValidationReport(
        scenario=f"step map vs equilibrium oracle ({policy})",
        params={
            "lane_rates": list(spec.lane_rates),
            "delta_d": spec.delta_d,
            "delta_s": spec.delta_s,
            "policy": policy,
            "stream_length": stream_length,
            "trials": trials,
            "seed": seed,
        },
        metrics=[
            Metric("max state discrepancy", worst_state, 0.0, tolerance),
            Metric("max event-delay gap (macro vs micro, informational)",
                   worst_delay, 0.0, float("inf")),
        ],
        fallback_count=fallbacks,
    )
    if fallbacks:
        report.notes.append(
            "fallback band between printed FO rows was hit; values resolved "
            "by direct re-ranking"
        )
    if policy == "fo" and spec.delta_s > 0 and worst_state > tolerance:
        report.notes.append(
            "FO with delta_s > 0: the two-lane state map is not closed over "
            "the replay dynamics (hidden same-lane queue can block the "
            "entrant), so exact agreement is not expected"
        )
    return report


def event_delay_samples(spec: IntersectionSpec, policy: str, events: int,
                        seed: int = 0, burn_in: int = 2000) -> np.ndarray:
    """Per-event macroscopic delays along one long two-lane trajectory.

    This is the quantity whose distribution the closed-form steady state
    describes: the summed change of the per-lane latest passing times
    caused by one arrival.  Cancellation in that sum leaves floating-point
    dust where the exact value is 0, so anything below 1e-9 is snapped to
    zero.
    """
    if spec.lane_count != 2:
        raise ValueError("two-lane spec required")
    gaps, lanes = EventStream(seed, spec).take(events)
    _, dvals, _ = mapping_trajectory(gaps, lanes, spec, policy)
    burn = min(burn_in, events // 2)
    out = dvals[burn:]
    return np.where(np.abs(out) < 1e-9, 0.0, out)


def _empirical_point_masses(states: np.ndarray, delta_d: float,
                            atol: float = 1e-9):
    peak = states.max(axis=1)
    zero = float(np.mean(np.abs(peak) <= atol))
    full = float(np.mean(np.abs(peak - delta_d) <= atol))
    return zero, full


def kolmogorov_distance(samples: np.ndarray, solution) -> float:
    """Sup distance between the sample CDF and the analytic delay CDF.

    The analytic law has an atom at 0, so the left-limit comparison uses
    F(0-) = 0 there instead of the continuous-CDF convention.
    """
    xs = np.clip(samples, 0.0, solution.delta_d)
    n = len(xs)
    vals, counts = np.unique(xs, return_counts=True)
    emp = np.cumsum(counts) / n
    emp_left = emp - counts / n
    cdf = np.asarray(ss.delay_cdf(solution, vals))
    cdf_left = np.where(vals > 0, cdf, 0.0)
    return float(max(np.abs(emp - cdf).max(),
                     np.abs(emp_left - cdf_left).max()))


def compare_eds_vs_analytic(lam: float, delta_d: float,
                            n: int = 10_000, seed: int = 0,
                            extra_iterations: int = 20,
                            prob_tolerance: float = 0.02,
                            ks_tolerance: float = 0.02) -> ValidationReport:
    """Event-driven simulation vs the closed-form FO steady state.

    Requires the closed form's regime: zero same-lane gap, symmetric lane
    rates (``lam`` is the total rate).  The ensemble is run to steady
    state, then a few more events are recorded to estimate the point
    masses and the per-event delay distribution.
    """
    spec = IntersectionSpec.two_lane(lam / 2.0, lam / 2.0, delta_d, 0.0)
    solution = ss.solve_steady_state(lam, delta_d)
    ens, iters, converged, _ = run_to_steady_state(
        spec, "fo", n=n, tol=0.05, max_iter=400, seed=seed)
    params = {"lambda": lam, "delta_d": delta_d, "particles": n,
              "seed": seed, "iterations": iters, "converged": converged}
    if not converged:
        return ValidationReport(
            scenario="EDS vs analytic steady state",
            params=params,
            metrics=[],
            notes=["EDS did not converge; no comparison performed"],
        )
    ens = propagate(ens, extra_iterations)
    zero, full = _empirical_point_masses(ens.states, delta_d)
    # the analytic CDF describes the per-event macroscopic delay, sampled
    # here along one long trajectory rather than across the ensemble
    samples = event_delay_samples(spec, "fo", events=max(50_000, 10 * n),
                                  seed=seed)
    ks = kolmogorov_distance(samples, solution)
    return ValidationReport(
        scenario="EDS vs analytic steady state",
        params=params,
        metrics=[
            Metric("zero-delay probability", zero,
                   2.0 * solution.mass_at_zero, prob_tolerance),
            Metric("full-gap delay probability", full,
                   2.0 * solution.mass_at_delta_d, prob_tolerance),
            Metric("Kolmogorov distance of delay CDF", ks, 0.0, ks_tolerance),
        ],
    )


def compare_policies(spec: IntersectionSpec, n: int = 10_000,
                     iterations: int = 8, seed: int = 0) -> ValidationReport:
    """FIFO vs FO with common random numbers.

    Both ensembles share the seed, hence see identical event batches.
    Reports the mean total lane delay and the mean per-event delay for
    each policy; the comparison metric passes when FO does not exceed
    FIFO.
    """
    results = {}
    for policy in ("fifo", "fo"):
        ens = init_ensemble(n, spec, seed, policy)
        ens, trace = propagate(ens, iterations - 1, record_delays=True)
        results[policy] = (mean_total_delay(ens), float(trace.delays.mean()))
    fifo_total, fifo_d = results["fifo"]
    fo_total, fo_d = results["fo"]
    report = ValidationReport(
        scenario="policy comparison (common random numbers)",
        params={"lane_rates": list(spec.lane_rates), "delta_d": spec.delta_d,
                "delta_s": spec.delta_s, "particles": n,
                "iterations": iterations, "seed": seed},
        metrics=[
            Metric("mean total delay (FIFO vs FO)", fifo_total, fo_total,
                   float("inf")),
            Metric("mean event delay (FIFO vs FO)", fifo_d, fo_d,
                   float("inf")),
            # passes exactly when FO does not exceed FIFO
            Metric("FO improvement (max(0, FO - FIFO) total delay)",
                   max(0.0, fo_total - fifo_total), 0.0, 0.0),
        ],
    )
    return report
