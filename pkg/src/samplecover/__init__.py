"""Sample covering numbers of transformation-induced pseudometrics, and
complexity bounds for invariant models."""
from .bounds import (adversarial_loss, refined_complexity_bound, powerset_index, global_complexity_bound,
                     selection_bound, transform_powerset)
from .complexity import (ComplexityEstimate, cyclic_shift_matrix, gaussian_comparison,
                         invariance_projector, rademacher_general, rademacher_invariant_inf,
                         rademacher_invariant_l2, reversal_matrix)
from .cover import (SampleCover, estimate, normalized_scn, scn_curve, scn_exact, scn_greedy,
                    scn_kmedoids, verify_cover)
from .data import (DataPoint, DistanceMatrix, Sample, TensorShape, load_dataset,
                   load_distance_matrix, load_manifest, save_distance_matrix)
from .metric import direct_orbit_distances, pseudometric, shortest_path_metric
from .transforms import TransformSpec, compose, materialize_orbit, parse_transform, preset

__version__ = "0.1.0"
