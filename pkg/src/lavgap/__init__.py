"""Numerical laboratory for Lavrentiev gaps in fractional double-phase energies.

Cantor barriers, competitor fields and degenerate weights, the four
double-phase energy models, parameter regimes and end-to-end gap sweeps.
"""

__version__ = "0.1.0"

from .errors import (BoundaryMismatchError, ConfigError, DivergenceError, LavgapError,
                     ParameterError, RegimeError, ResourceLimitError, SingularInputError)
from .fractal import CantorMeasure, FractalParams, build_generation, fractal_dimension
from .regimes import (ModelParams, classify_regime, dimension_window, gap_condition,
                      window_consistency)
from .energy import QuadratureSpec, assemble_model, gagliardo_phase, luxemburg_norm
from .experiments import SweepSpec, certificate_sound, finiteness_scan, run_gap_sweep

__all__ = [
    "__version__", "LavgapError", "ParameterError", "ResourceLimitError",
    "SingularInputError", "RegimeError", "DivergenceError", "ConfigError",
    "BoundaryMismatchError", "FractalParams", "CantorMeasure", "build_generation",
    "fractal_dimension", "ModelParams", "classify_regime", "gap_condition",
    "dimension_window", "window_consistency", "QuadratureSpec", "assemble_model",
    "gagliardo_phase", "luxemburg_norm", "SweepSpec", "certificate_sound", "run_gap_sweep",
    "finiteness_scan",
]
