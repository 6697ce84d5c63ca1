"""Closed-form steady state of the FO two-lane model with zero same-lane gap.

Valid for symmetric flow (equal lane rates, entered as the total rate) and
delta_s = 0.  At steady state the delay vector concentrates on the two
lines where the lane delays differ by exactly delta_d; the half-density g
of the maximum lane delay has an exponential finite part on (0, delta_d)
and point masses at 0 (no delay) and delta_d (full-gap delay).  From g the
distribution and expectation of the per-event scalar delay follow in
closed form, with a simple low-flow approximation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

# Exponential terms scale with lam * delta_d; beyond this the closed forms
# overflow double precision, and the regime is deeply congested anyway.
MAX_LAMBDA_DELTA_D = 50.0


@dataclass(frozen=True)
class SteadyStateSolution:
    """FO steady state for total rate ``lam`` (per-lane rate lam/2).

    ``c`` is the coefficient of the exponential finite part
    ``c * exp(lam * t / 2)`` on (0, delta_d); ``mass_at_zero`` and
    ``mass_at_delta_d`` are the point masses of the half-density.
    """

    lam: float
    delta_d: float
    c: float
    mass_at_zero: float
    mass_at_delta_d: float

    def density(self, t) -> np.ndarray:
        """Finite part of the half-density on (0, delta_d); 0 outside."""
        t = np.asarray(t, dtype=float)
        inside = (t > 0) & (t < self.delta_d)
        return np.where(inside, self.c * np.exp(0.5 * self.lam * t), 0.0)


def _check_params(lam: float, delta_d: float):
    if lam <= 0:
        raise ValueError("flow rate must be > 0")
    if delta_d <= 0:
        raise ValueError("delta_d must be > 0")
    if lam * delta_d > MAX_LAMBDA_DELTA_D:
        raise ValueError(
            f"lam * delta_d = {lam * delta_d:g} exceeds supported range "
            f"{MAX_LAMBDA_DELTA_D}"
        )


def solve_steady_state(lam: float, delta_d: float) -> SteadyStateSolution:
    """Solve the FO steady state (delta_s = 0, symmetric rates)."""
    _check_params(lam, delta_d)
    a = lam * delta_d
    c = lam * (1.0 + math.exp(-a)) / (
        8.0 * (math.exp(a / 2.0) + math.exp(-a / 2.0) - 1.0)
    )
    g0 = 2.0 * c / lam
    gdd = 0.5 - 2.0 * math.exp(a / 2.0) * c / lam
    return SteadyStateSolution(lam, delta_d, c, g0, gdd)


def zero_delay_probability(lam: float, delta_d: float) -> float:
    """P(no delay) = twice the point mass at 0; depends on lam*delta_d only."""
    return 2.0 * solve_steady_state(lam, delta_d).mass_at_zero


def full_gap_delay_probability(lam: float, delta_d: float) -> float:
    """P(delay = delta_d) = twice the point mass at delta_d."""
    return 2.0 * solve_steady_state(lam, delta_d).mass_at_delta_d


def point_mass_curves(lam_delta_d_grid: Iterable[float]) -> np.ndarray:
    """Table of (lam*delta_d, P(zero delay), P(delta_d delay)).

    Both probabilities are functions of the product lam*delta_d alone;
    each grid point is evaluated at unit delta_d.
    """
    rows = []
    for a in lam_delta_d_grid:
        if a <= 0:
            raise ValueError("grid values must be positive")
        rows.append((a, zero_delay_probability(a, 1.0),
                     full_gap_delay_probability(a, 1.0)))
    return np.array(rows)


def delay_cdf(solution: SteadyStateSolution, t) -> np.ndarray:
    """Cumulative distribution of the per-event delay on [0, delta_d].

    Has an atom at 0 equal to the zero-delay probability and reaches 1 at
    delta_d.
    """
    lam, dd, c = solution.lam, solution.delta_d, solution.c
    t_arr = np.asarray(t, dtype=float)
    if np.any((t_arr < 0) | (t_arr > dd)):
        raise ValueError(f"delay must lie in [0, {dd}]")
    out = (4.0 * c / lam) * (
        np.exp(0.5 * lam * t_arr)
        - np.exp(0.5 * lam * (dd - t_arr))
        + np.exp(0.5 * lam * dd - lam * t_arr)
    ) + 0.5 * (1.0 - np.exp(-lam * t_arr))
    return out if out.ndim else float(out)


def delay_density(solution: SteadyStateSolution, t) -> np.ndarray:
    """Density of the per-event delay on the open interval (0, delta_d)."""
    lam, dd = solution.lam, solution.delta_d
    t_arr = np.asarray(t, dtype=float)
    if np.any((t_arr <= 0) | (t_arr >= dd)):
        raise ValueError(f"density is defined on (0, {dd})")
    c = solution.c
    out = (4.0 * c / lam) * (
        0.5 * lam * np.exp(0.5 * lam * t_arr)
        + 0.5 * lam * np.exp(0.5 * lam * (dd - t_arr))
        - lam * np.exp(0.5 * lam * dd - lam * t_arr)
    ) + 0.5 * lam * np.exp(-lam * t_arr)
    return out if out.ndim else float(out)


def expected_delay(lam: float, delta_d: float) -> float:
    """Mean per-event delay at steady state; lies in (0, delta_d / 2)."""
    _check_params(lam, delta_d)
    a = lam * delta_d
    return delta_d / 2.0 + (math.exp(-a) - 1.0) / (
        2.0 * lam * (math.exp(a / 2.0) + math.exp(-a / 2.0) - 1.0)
    )


def low_flow_approx(lam: float, delta_d: float) -> float:
    """Low-flow expansion of the expected delay: lam * delta_d^2 / 4."""
    if lam < 0 or delta_d < 0:
        raise ValueError("parameters must be non-negative")
    return lam * delta_d * delta_d / 4.0
