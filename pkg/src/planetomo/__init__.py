"""Tomographic heatmaps from per-slice evaluator outputs.

The pipeline: sample directions on the sphere, extract a stack of planes
per direction, reduce each plane with an evaluator (pixel mean, pooled
grid, or an external process wrapping a trained model), filter the
per-direction profile with a second difference along the offset axis,
and backproject the filtered profiles into a 3D heatmap.  Postprocessing
turns heatmaps into binary masks and segmentation scores.
"""

from .backprojection import (
    C_NORM_DEFAULT,
    Heatmap3,
    ReconConfig,
    reconstruct,
    reconstruct_averaged_cam,
    reconstruct_scalar,
    reconstruct_tomographic_cam,
    selftest_metrics,
)
from .evaluators import (
    ExternalEvaluator,
    PooledGridEvaluator,
    SumEvaluator,
    evaluate_batch,
    evaluator_from_spec,
    forward_pooled,
    forward_sum,
)
from .filtering import (
    FilteredProfile,
    interp_profile,
    linear_profile,
    second_difference,
    second_difference_grid,
    trilinear_profile,
)
from .geometry import DirectionFrame, fibonacci_lattice, make_frame
from .phantoms import ball, ellipsoids, one_hot, two_ellipsoids
from .postprocess import (
    LabeledSample,
    binarize,
    connected_components,
    match_and_score,
    monte_carlo_eval,
    select_tau,
    select_tau_prime,
)
from .slicing import (
    Slice2,
    SliceStack,
    extract_slice,
    extract_stack,
    sample_training_stacks,
)
from .volume import Volume3, interpolate, load_volume, save_volume

__version__ = "0.1.0"

__all__ = [
    "C_NORM_DEFAULT",
    "DirectionFrame",
    "ExternalEvaluator",
    "FilteredProfile",
    "Heatmap3",
    "LabeledSample",
    "PooledGridEvaluator",
    "ReconConfig",
    "Slice2",
    "SliceStack",
    "SumEvaluator",
    "Volume3",
    "ball",
    "binarize",
    "connected_components",
    "ellipsoids",
    "evaluate_batch",
    "evaluator_from_spec",
    "extract_slice",
    "extract_stack",
    "fibonacci_lattice",
    "forward_pooled",
    "forward_sum",
    "interp_profile",
    "interpolate",
    "linear_profile",
    "load_volume",
    "make_frame",
    "match_and_score",
    "monte_carlo_eval",
    "one_hot",
    "reconstruct",
    "reconstruct_averaged_cam",
    "reconstruct_scalar",
    "reconstruct_tomographic_cam",
    "sample_training_stacks",
    "save_volume",
    "second_difference",
    "second_difference_grid",
    "select_tau",
    "select_tau_prime",
    "selftest_metrics",
    "trilinear_profile",
    "two_ellipsoids",
]
