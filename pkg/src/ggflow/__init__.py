"""Invariant generalized geometry: Courant algebroids, generalized Ricci
tensors, generalized Ricci flow, T-duality and Killing spinors."""

from __future__ import annotations

from .courant import CourantAlgebroid, FrameData, QuadraticFiber
from .gconn import (
    DivergenceOperator,
    GenConnection,
    GeneralizedMetric,
    build_generalized_metric,
    divergence_of,
    divergence_operator,
    gualtieri_bismut,
    levi_civita,
)
from .lie import FrameMetric, KForm, LieAlgebra
from .ricci import RicciResult, ricci_closed_form, ricci_trace
from .flow import FlowState, flow_rhs, integrate_flow, stationarity_residual
from .spinor import SU3Structure, build_clifford, parallel_spinor_space, strominger_residuals
from .tduality import FiberedGridModel, TorusBundleData, dualize_buscher, verify_duality

__version__ = "0.1.0"

__all__ = [
    "CourantAlgebroid", "DivergenceOperator", "FrameData", "FrameMetric", "GenConnection",
    "GeneralizedMetric", "KForm", "LieAlgebra", "QuadraticFiber", "RicciResult",
    "build_generalized_metric", "divergence_of", "divergence_operator", "gualtieri_bismut",
    "levi_civita", "ricci_closed_form", "ricci_trace", "FlowState", "flow_rhs", "integrate_flow",
    "stationarity_residual", "SU3Structure", "build_clifford", "parallel_spinor_space",
    "strominger_residuals", "FiberedGridModel", "TorusBundleData", "dualize_buscher",
    "verify_duality",
]
