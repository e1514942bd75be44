"""Pattern frequencies and ergodic averages of (randomly coloured) point sets."""
from .geometry import (
    TOL_MATCH,
    HullDistance,
    PointSet,
    Thickening,
    contains_ball_point,
    hull_distance,
    packing_bound,
    verify_relative_denseness,
    verify_uniform_discreteness,
)
from .groups import (
    GroupElement,
    GroupSpec,
    TwoSidedBox,
    Window,
    act,
    compose,
    folner_ratio,
    haar_volume,
    identity,
    inverse,
    shulman_constant,
    unimodularity_check,
    van_hove_ratio,
    window_sequence,
)
from .patterns import (
    BallSupport,
    BoxSupport,
    Pattern,
    are_equivalent,
    canonical_form,
    count_occurrences,
    extract_patterns,
    flc_enumerate,
    pattern_frequency,
)
from .generators import GeneratorSpec, fibonacci, generate, jittered_lattice, lattice, rotated_union, silver_chain
from .scanning import BallIndicator, BoxIndicator, ColourIndicator, IntervalIndicator, ScanningFunction, Tent
from .colouring import (
    ColourLaw,
    ColouredPointSet,
    ColourSpace,
    Marginal,
    colour_average,
    sample_colours,
    shift_colouring,
)
from .ergodics import (
    CylinderSpec,
    birkhoff_average_exact,
    birkhoff_average_mc,
    ergodic_consistency_report,
    estimate_coloured_cylinder,
    estimate_cylinder_measure,
    fubini_check,
    lln_gap_diagnostic,
)
from .graphs import Graph, encode_graph, grid_graph, patch, patch_frequency, sample_graph_colouring

__version__ = "0.1.0"
