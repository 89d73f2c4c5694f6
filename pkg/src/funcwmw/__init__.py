"""Spatial-rank Wilcoxon-Mann-Whitney two-sample test for functional data."""

from .fspace import Curve, DualVector, Grid, LpGeometry, Sample, dual_norm, lp_norm, pair, sgn, unit_grid
from .meantests import mean_test_pvalues, mean_tests, t_cff, t_hkr
from .simproc import KlSpec, ShiftSpec, apply_shift, gen_sample, sbm, t_process
from .wmw import WmwTestResult, t_wmw, wmw_test

__version__ = "0.1.0"

__all__ = [
    "Curve", "DualVector", "Grid", "KlSpec", "LpGeometry", "Sample", "ShiftSpec",
    "WmwTestResult", "apply_shift", "dual_norm", "gen_sample", "lp_norm", "mean_test_pvalues",
    "mean_tests", "pair", "sbm", "sgn", "t_cff", "t_hkr", "t_process", "t_wmw", "unit_grid",
    "wmw_test",
]
