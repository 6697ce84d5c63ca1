"""Closed-form steady-state curves vs event-driven simulation.

Three panels for the symmetric two-lane intersection with zero same-lane
gap under the flexible-order policy:
  1. point masses P(d = 0) and P(d = delta_d) as functions of lam*delta_d,
     with event-driven estimates overlaid,
  2. the delay CDF at lam = 1 for several delta_d,
  3. expected delay vs lam at delta_d = 1.5 with the low-flow quadratic.

Writes demos/out/steady_state.png and prints the comparison tables.
"""
import os

import numpy as np

from intersim import (IntersectionSpec, delay_cdf, event_delay_samples,
                      expected_delay, low_flow_approx, point_mass_curves,
                      run_to_steady_state, solve_steady_state)
from intersim.validation import _empirical_point_masses


def empirical_point_masses(lam_dd, n=10_000, seed=0):
    spec = IntersectionSpec.two_lane(lam_dd / 2, lam_dd / 2, 1.0, 0.0)
    ens, _, converged, _ = run_to_steady_state(spec, "fo", n=n, seed=seed,
                                               max_iter=400)
    if not converged:
        return np.nan, np.nan
    return _empirical_point_masses(ens.states, 1.0)


def main():
    grid = np.arange(0.25, 5.0 + 1e-9, 0.25)
    curves = point_mass_curves(grid)
    marks = np.arange(0.5, 5.1, 0.5)
    sim = np.array([empirical_point_masses(a) for a in marks])
    print("lam*dd   P0(analytic)  P0(EDS)   Pdd(analytic)  Pdd(EDS)")
    for a, (z, f) in zip(marks, sim):
        row = curves[np.isclose(curves[:, 0], a)][0]
        print(f"{a:5.2f}   {row[1]:.6f}     {z:.4f}    {row[2]:.6f}      "
              f"{f:.4f}")

    lam = 1.0
    cdf_dd = (1.0, 2.0, 3.0, 4.0)
    print("\nexpected delay at delta_d = 1.5:")
    lams = np.arange(0.1, 4.0 + 1e-9, 0.1)
    eds = [expected_delay(l, 1.5) for l in lams]
    for l in (0.2, 0.5, 1.0, 2.0, 4.0):
        print(f"  lam {l:.1f}: E(d) = {expected_delay(l, 1.5):.6f}, "
              f"low-flow approx {low_flow_approx(l, 1.5):.6f}")

    try:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        print("matplotlib not available; skipping the figure")
        return
    fig, (ax1, ax2, ax3) = plt.subplots(1, 3, figsize=(15, 4.5))
    ax1.plot(curves[:, 0], curves[:, 1], label="P(d = 0)")
    ax1.plot(curves[:, 0], curves[:, 2], label="P(d = $\\Delta d$)")
    ax1.plot(marks, sim[:, 0], "o", ms=4, label="EDS, zero delay")
    ax1.plot(marks, sim[:, 1], "s", ms=4, label="EDS, full-gap delay")
    ax1.set_xlabel("$\\lambda \\Delta d$")
    ax1.set_ylabel("probability")
    ax1.legend()

    for dd in cdf_dd:
        sol = solve_steady_state(lam, dd)
        ts = np.linspace(0, dd, 200)
        ax2.plot(ts, delay_cdf(sol, ts), label=f"$\\Delta d$ = {dd:g}")
    ax2.set_xlabel("t [s]")
    ax2.set_ylabel("$P_d(t)$")
    ax2.legend()

    ax3.plot(lams, eds, label="E(d)")
    ax3.plot(lams, [low_flow_approx(l, 1.5) for l in lams], "--",
             label="$\\lambda \\Delta d^2 / 4$")
    ax3.set_ylim(0, 1.0)
    ax3.set_xlabel("$\\lambda$ [1/s]")
    ax3.set_ylabel("expected delay [s]")
    ax3.legend()

    fig.tight_layout()
    out = os.path.join(os.path.dirname(__file__), "out")
    os.makedirs(out, exist_ok=True)
    path = os.path.join(out, "steady_state.png")
    fig.savefig(path, dpi=120)
    print(f"figure written to {path}")


if __name__ == "__main__":
    main()
