"""Event-driven simulation and analysis of delay at unmanaged intersections."""

from .core import (ArrivalEvent, EventStream, IntersectionSpec, SpecError,
                   clamp_delays, sample_event, validate_spec)
from .micro import (EquilibriumResult, VehicleRecord, event_delay,
                    fifo_equilibrium, fo_equilibrium, lane_delays)
from .stepmap import (FALLBACK_REGION, RegionLabel, classify_region,
                      fifo_step, fifo_step_general, fo_step, step_batch,
                      step_with_delay)
from .ensemble import (DelayTrace, Histogram2D, ParticleEnsemble,
                       ergodic_mean_delay, histogram, init_ensemble,
                       l1_distance, mean_total_delay, propagate,
                       run_to_steady_state)
from .steady_state import (SteadyStateSolution, delay_cdf, delay_density,
                           expected_delay, full_gap_delay_probability,
                           low_flow_approx, point_mass_curves,
                           solve_steady_state, zero_delay_probability)
from .validation import (Metric, ValidationReport, compare_eds_vs_analytic,
                         compare_mapping_vs_oracle, compare_policies,
                         event_delay_samples, kolmogorov_distance,
                         mapping_trajectory, oracle_trajectory)

__version__ = "0.1.0"
