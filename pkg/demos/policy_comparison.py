"""FIFO vs flexible order on common random numbers.

Runs both policies through identical event streams at the reference
parameters (rates 0.1/0.5, delta_d = 2, delta_s = 1) and at a swept total
rate, reporting the ensemble mean total delay and the long-run per-event
delay.  Flexible order consistently lowers the mean, even though single
vehicles can be worse off (promoting a platoon can push a lone vehicle in
the other lane past its FIFO slot).
"""
import numpy as np

from intersim import (IntersectionSpec, compare_policies, ergodic_mean_delay,
                      fifo_equilibrium, fo_equilibrium, VehicleRecord)

SPEC = IntersectionSpec.two_lane(0.1, 0.5, 2.0, 1.0)


def per_vehicle_counterexample():
    vehicles = [VehicleRecord(1, 0.0, 1), VehicleRecord(2, 0.5, 2),
                VehicleRecord(3, 0.6, 1)]
    fifo = fifo_equilibrium(vehicles, SPEC).passing_times
    fo = fo_equilibrium(vehicles, SPEC).passing_times
    print("per-vehicle counterexample (desired 0.0/0.5/0.6, lanes 1/2/1):")
    print(f"  FIFO passing times: {fifo}")
    print(f"  FO passing times:   {fo}")
    print(f"  vehicle 2 waits {fo[1] - fifo[1]:.1f} s longer under FO, but "
          f"the total is {fifo.sum() - fo.sum():.1f} s smaller")


def main():
    rep = compare_policies(SPEC, n=10_000, iterations=8, seed=0)
    print(rep.to_text())
    print()
    per_vehicle_counterexample()
    print()
    print("ergodic mean per-event delay vs total rate "
          "(delta_d = 2, delta_s = 1, rates split 1:5):")
    print("  rate    FIFO     FO      saving")
    for total in (0.3, 0.6, 0.9, 1.2):
        spec = IntersectionSpec.two_lane(total / 6, 5 * total / 6, 2.0, 1.0)
        fifo = ergodic_mean_delay(spec, "fifo", events=200_000, seed=0)
        fo = ergodic_mean_delay(spec, "fo", events=200_000, seed=0)
        print(f"  {total:.2f}   {fifo:8.2f}  {fo:8.2f}  "
              f"{100 * (1 - fo / fifo):5.1f}%")
    print("  (huge FIFO means mark supercritical load: the queue grows "
          "without bound, while FO still clears)")


if __name__ == "__main__":
    main()
