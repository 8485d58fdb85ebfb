"""Deficit scaling laws for high-order velocity and temperature moments in channel flow."""

__version__ = "0.1.0"

from .errors import ChanscaleError, NumericalError, StageError, ValidationError
from .fitting import (
    PowerLawFit,
    PrefactorModel,
    ScalingExponents,
    anomalous_scaling_report,
    exponent,
    extract_sigmas,
    fit_constrained,
    fit_power_law,
    fit_prefactor_model,
    predict_moment,
)
from .moments import CenterlinePolicy, SnapshotEnsemble, compute_moment, h_from_r, r_from_h, to_deficit
from .mpc import SymmetryParams, apply_symmetry, count_continuity_relations, enumerate_mpc_terms, infinitesimal_generator
from .types import Basis, FlowCase, MomentOrder, MomentProfile, WallNormalGrid, make_flow_case
