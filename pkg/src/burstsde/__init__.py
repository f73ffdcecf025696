"""Bursty nonlinear-SDE simulation and first-passage analysis toolkit."""

from .bessel import (
    BesselIndex,
    FptSpec,
    bessel_j,
    bessel_zeros,
    burst_pdf_closed,
    burst_pdf_series,
    crossover_time,
    fpt_density,
    index_from,
    lamperti,
    lamperti_inverse,
    normalization_constants,
)
from .bursts import (
    Burst,
    BurstSequence,
    LogHistogram,
    PowerLawFit,
    PsdResult,
    binned_scatter,
    detect_bursts,
    fit_power_law,
    log_binned_density,
    psd_estimate,
)
from .errors import (
    BurstSdeError,
    DomainError,
    NumericalError,
    ParameterError,
    SimulationTruncated,
)
from .returns import (
    QGaussianParams,
    ReturnModelParams,
    ReturnSeries,
    moving_average,
    qgaussian_pdf,
    sample_qgaussian,
    simulate_returns,
    volatility_r0,
)
from .runs import (
    simulate_bursts,
    simulate_uniform,
    simulate_weighted_histogram,
)
from .sde import (
    SIGMA_T_SQ_EMPIRICAL,
    ComplexSdeParams,
    Path,
    SdeParams,
    SimConfig,
    bessel_fpt_samples,
    sde_fpt_samples,
    diffusion_complex,
    diffusion_simple,
    drift_complex,
    drift_simple,
    simulate,
    spectral_beta,
    stationary_pdf,
    step_adaptive,
)

__version__ = "0.1.0"
