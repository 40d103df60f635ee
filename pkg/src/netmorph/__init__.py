"""Wide/deep quasi-equivalence transforms for ReLU networks."""

from netmorph.classify import (
    ArchitecturePlan,
    RuleSystem,
    build_demorgan_deep,
    build_demorgan_wide,
    build_mixed,
    build_step_deep,
    build_step_wide,
    classify_transform,
)
from netmorph.errors import (
    DegeneratePieceError,
    DegenerateSimplexError,
    InfeasibleParametersError,
    InputError,
    NetmorphError,
    NetworkParseError,
    UnsupportedNetworkError,
)
from netmorph.fanshape import FanSpec, build_fan_2d, build_fan_nd
from netmorph.geometry import Hypercube, LinearPiece, Simplex, SimplicialCover
from netmorph.netcore import (
    Activation,
    Network,
    NetworkBuilder,
    Neuron,
    StructureMetrics,
    compose_stack,
    compose_sum,
    deserialize,
    evaluate,
    serialize,
    structure_metrics,
)
from netmorph.pwl1d import PwlFunction1D, build_deep, build_wide, extract_pwl
from netmorph.regress import TransformParams, choose_params, transform
from netmorph.verify import exact_compare_1d, mismatch_measure, structural_audit

__version__ = "0.1.0"
