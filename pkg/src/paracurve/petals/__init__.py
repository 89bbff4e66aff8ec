"""Numerical construction of parabolic curves on sector grids."""

from .engine import (HAVE_KERNEL, AsymptoticReport, OrbitTrace,
                     ParabolicCurveNumeric, SectorGrid, StabilityReport,
                     apply_T, construct, default_grid, E_factors, H_eval,
                     interp_values, invariance_residual, measure_contraction,
                     orbit, orbit_law_ratio, pack_problem, select_engine,
                     verify_asymptotic, verify_stability)
from .normalize import NormalizedMapData, compute_m0, normalize_rs

__all__ = [
    "HAVE_KERNEL", "AsymptoticReport", "OrbitTrace", "ParabolicCurveNumeric",
    "SectorGrid", "StabilityReport", "apply_T", "construct", "default_grid",
    "E_factors", "H_eval", "interp_values", "invariance_residual",
    "measure_contraction", "orbit", "orbit_law_ratio", "pack_problem",
    "select_engine", "verify_asymptotic", "verify_stability",
    "NormalizedMapData", "compute_m0", "normalize_rs",
]
