"""Shot-to-shot correlations of qubit measurements under Gaussian dephasing noise.

All frequencies are angular (rad/s) and spectra are two-sided.
"""

from ._core import (
    BOHR_MAGNETON_OVER_HBAR,
    ConfigError,
    CorrelationPoint,
    CorrelatorValue,
    DomainError,
    NumericalError,
    OverhauserModel,
    PowerLawModel,
    QubitParams,
    Spectrum,
    TabulatedModel,
    WhiteModel,
    autocorrelation,
    autocorrelation_linearized,
    beta_autocorrelation,
    chi_minus,
    chi_minus_approx,
    chi_plus,
    correct_fidelity,
    discriminate_gamma,
    estimate_alpha_slope,
    load_tabulated_csv,
    oneoverf_c_level,
    overhauser_s0_for_rms,
    phase_variance,
    simulate,
    t2_star,
    tau_constant_contrast,
    tau_oneoverf,
    variance,
)

__all__ = [name for name in dir() if not name.startswith("_")]
