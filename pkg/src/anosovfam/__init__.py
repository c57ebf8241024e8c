"""Anosov families on flat 2-tori: hyperbolicity estimates, local invariant
manifolds by the graph transform, and exponential decay of orbit pairs."""

from .errors import *  # noqa: F401,F403
from .family import (
    ComposedMap,
    InverseMap,
    MetricTensor,
    NsdsFamily,
    Perturbation,
    TorusMap,
    TorusPoint,
    compose,
    constant_family,
    derivative_cocycle,
    distance,
    injectivity_radius,
    inverse_map,
    orbit,
)
from .families import (
    cat_family,
    cat_map,
    diagonal_family,
    example23_family,
    example24_family,
    identity_family,
    perturbed_cat_family,
    perturbed_cat_map,
    zeta_law,
)
from .hyperbolicity import (
    adapted_metric,
    angles_sequence,
    estimate_splitting,
    frames_along_orbit,
    gathering,
    minimal_gathering_length,
    property_of_angles,
    verify_anosov,
)
from .graph_transform import (
    ChartedStep,
    LipschitzGraph,
    build_charted_step,
    estimate_sigma,
    fixed_point,
    graph_transform_step,
    rate_table,
    reflect,
    schedule_deltas,
    stable_manifold,
    unstable_manifold,
)
from .orbits import (
    coincidence_quantities,
    decay_report,
    expansivity_probe,
    manifold_subset_check,
    metric_equivalence_nesting,
)

__version__ = "0.1.0"
