"""Hausdorff dimension of non-linear carpets via transfer operators.

Carpets are planar self-affine sets built from maps (x, y) |-> (a(y)x + u(y),
b(y)) arranged in horizontal rows; the package computes the dimension, the
ergodic measure attaining it, and a numerical certificate that it is unique.
"""

__version__ = "0.1.0"

from .carpet import (CarpetSpec, CellSpec, DominationConstants, PerturbResult,
                     Poly, RowSpec, ValidationReport, coefficient_distance,
                     domination_constants, format_carpet, holder_proxies,
                     make_sierpinski, parse_carpet, perturb_carpet,
                     read_carpet, validate_carpet, write_carpet)
from .coding import (TailCoordinate, composition_bounds, cylinder_interval,
                     format_full_word, parse_full_word, parse_row_word,
                     tail_coordinate)
from .errors import (BracketFailure, CarpetError, DegenerateFamily,
                     InfeasibleLayout, InvalidCarpet, IterationLimit,
                     MalformedSpec, NoConvergence, NonContractive,
                     NonPrimitive, NoRootInUnitInterval,
                     PerturbationTooLarge, TooDeep)
from .fulldim import (AFamily, FullDimSolution, PhiFamily, TRange,
                      UniquenessReport, a_family, beta_of_t, check_H_eps,
                      dimension_of_measure, fiber_weights, measure_cylinder,
                      pressure_curve, psi_observable, solve_full_dimension,
                      t_of_measure, t_range, uniqueness_certificate)
from .geometry import (box_count, render_regions, sample_points,
                       vertical_graph_distortion_check)
from .transfer import (DEFAULT_K, GibbsSystem, Observable, branch_function,
                       build_operator, correlation_form, cylinder_mass,
                       entropy, expectation)
from .variational import (LevelNProblem, bernoulli_weights_level_n,
                          build_level_n, lambda_n, optimize_level_n, t_n_root)
