"""Space-time minimum-residual (AVS-FE) solver for the 1-D viscous shallow water equations."""

from .adapt import (AdaptConfig, IndicatorField, RunRecord, adapt_loop, dorfler_mark,
                    energy_error, indicators, read_record)
from .bench import BenchmarkCase, run_case
from .cases import (Manufactured, dambreak_case, lake_bathymetry, lake_case, manufactured_case,
                    tidal_case)
from .errors import InvalidArgument, InvalidMesh, NonConvergence, SolverFailure, SWEError
from .fespace import (ExactField, ExactFields, FESpace, FieldFunction, SpaceConfig,
                      error_norms, interpolate, l2_norm, make_space, quadrature, tabulate)
from .forms import (FormAssembler, GramSpec, PhysicalParams, ProblemSpec, Spaces, TrialState,
                    gram_matrix, jacobian, load, make_spaces, residual)
from .io import rate_fit, read_config, sample_line, write_vtk
from .mesh import BoundaryTag, SpaceTimeMesh, bisect, build_structured, uniform_refine
from .slices import SliceConfig, compare_full_vs_slices, run_slices
from .solver import (ErrorRepresenter, NewtonConfig, NewtonResult, condensed_step,
                     newton_solve, saddle_step, solve)

__all__ = [
    "AdaptConfig", "BenchmarkCase", "BoundaryTag", "ErrorRepresenter", "ExactField",
    "ExactFields", "FESpace", "FieldFunction", "FormAssembler", "GramSpec", "IndicatorField",
    "InvalidArgument", "InvalidMesh", "Manufactured", "NewtonConfig", "NewtonResult",
    "NonConvergence", "PhysicalParams", "ProblemSpec", "RunRecord", "SWEError", "SliceConfig",
    "SolverFailure", "SpaceConfig", "SpaceTimeMesh", "Spaces", "TrialState", "adapt_loop",
    "bisect", "build_structured", "compare_full_vs_slices", "condensed_step", "dambreak_case",
    "dorfler_mark", "energy_error", "error_norms", "gram_matrix", "indicators", "interpolate",
    "jacobian", "l2_norm", "lake_bathymetry", "lake_case", "load", "make_space", "make_spaces",
    "manufactured_case", "newton_solve", "quadrature", "rate_fit", "read_config", "read_record",
    "residual", "run_case", "run_slices", "saddle_step", "sample_line", "solve", "tabulate",
    "tidal_case", "uniform_refine", "write_vtk",
]
