"""Kaluza-Klein reduction of conformally flat spaces: curvature, flatness residuals and exact solutions."""

from .expr import Expr, parse, eval_jet3, evaluate, diff
from .jets import Jet
from .tensors import MetricField, CurvatureBundle, curvature_at, cotton_at, raise_index, lower_index, trace
from .kk import (
    KKDecomposition,
    FieldStrength,
    assemble,
    field_strength,
    reduced_riemann,
    reduced_ricci,
    reduced_weyl,
)
from .flatness import (
    ResidualReport,
    FlatnessConstant,
    general_flatness_residuals,
    curvature_constant,
    killing_residual,
    dual_killing,
    second_derivative_identity,
    n4_einstein_form,
    covariantly_constant_check,
    cotton_reduction_residuals,
    quadratic_action_density,
)
from .dilaton import DilatonModel, dilaton_generate, constant_dilaton_vacua
from .catalog import (
    SolutionInstance,
    instantiate,
    closed_form_ricci,
    minimaster_residuals,
    newminimaster_residuals,
    horizon_roots,
    appendix_formulas,
)
from .sampling import SplitMix64, sample_box

__version__ = "0.1.0"
