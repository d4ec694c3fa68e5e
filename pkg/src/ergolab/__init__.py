"""ergolab: a numerical laboratory for nonuniformly hyperbolic dynamics.

Concrete systems with explicit dominated splittings, split log-norm
cocycles along orbits, Pliss and hyperbolic time detectors, coherent
schedules and blocks, expansion-time tails with decay classification,
correlation estimates, holonomy densities, and basin-membership scans.
"""

__version__ = "0.1.0"

from .errors import (BranchAmbiguous, ConfigInvalid, DomainEscape,
                     ErgolabError, InsufficientData, NotInvertible,
                     NotSameFiber, PreconditionViolated)
from .systems import (BumpSpec, CatMap, DerivedAnosovT2, IntermittentCircle,
                      ModifiedSolenoid, Solenoid, SplitLogNorms, System,
                      SystemSpec, build_system, domination_margin,
                      intermittent_deriv, intermittent_map, make_system)
from .cocycle import (CocycleTrace, LyapunovEstimate, OrbitSegment,
                      birkhoff_average, birkhoff_sum, generate_orbit,
                      lyapunov, nue_check, orbit_trace, partial_sums, trace)
from .hyptimes import (ExpansionTime, RateParams, TimeSet, expansion_time,
                       frequency, hyperbolic_times, inverse_hyperbolic_times,
                       pliss_times, reverse_hyperbolic_times,
                       verify_time_certificate)
from .schedules import (BlockEstimate, BlockMembership, CoherenceReport,
                        EventDetector, ScheduleMask, block_membership,
                        block_theorem_check, coherence_check, density_grid,
                        density_plus, detector_family, resolve_detector,
                        schedule_family_violations)
from .mixing import (CorrelationSeries, DecayFit, HolonomyDensity,
                     MixingClass, TailHistogram, classify_tail,
                     estimate_correlation, fit_decay, holonomy_density,
                     observable_battery, predict_mixing_class, srb_sampler,
                     srb_stability, tail_fit_grid, tail_histogram)
from .basins import (AgreementReport, BasinVerdict, ReferenceMeasure,
                     agreement_scan, build_reference, default_ergodic_tol,
                     default_geometric_tol, ergodic_basin_test,
                     geometric_basin_test)
from .config import ExperimentConfig, print_schema
from .parallel import N_CHUNKS, chunk_bounds, map_chunked, rng_for
