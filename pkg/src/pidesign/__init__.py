"""Dimensionless-group derivation and experimental design on the induced region."""

from .dimension import (
    DAModel,
    DAProblem,
    DimVector,
    PiGroup,
    Quantity,
    derive_model,
)
from .designs import (
    Design,
    WeightedModel,
    coordinate_exchange,
    criterion_imv,
    i_efficiency,
    weight_sweep,
)
from .geometry import PiRegion, region_for
from .ipsen import ipsen_derive, model_from_ipsen
from .models import full_poly, moment_matrix
from .problems import builtin_names, load_builtin, load_problem
from .robustda import compound_criterion, empirical_model, maximin_over_w, robust_exchange
from .uniform import fff_design, fff_select, rejection_sample, uniform_vs_parametric_report

__all__ = [
    "DAModel",
    "DAProblem",
    "Design",
    "DimVector",
    "PiGroup",
    "PiRegion",
    "Quantity",
    "WeightedModel",
    "builtin_names",
    "compound_criterion",
    "coordinate_exchange",
    "criterion_imv",
    "default_model",
    "derive_model",
    "empirical_model",
    "fff_design",
    "fff_select",
    "full_poly",
    "i_efficiency",
    "ipsen_derive",
    "load_builtin",
    "load_problem",
    "maximin_over_w",
    "model_from_ipsen",
    "moment_matrix",
    "region_for",
    "rejection_sample",
    "robust_exchange",
    "uniform_vs_parametric_report",
    "weight_sweep",
]

__version__ = "0.1.0"


def default_model(problem: DAProblem) -> DAModel:
    """Model via the pinned elimination order when one is declared, else nullspace."""
    if problem.ipsen_order is not None:
        return model_from_ipsen(problem)
    return derive_model(problem)
