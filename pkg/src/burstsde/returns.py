"""Double-stochastic return model and the pre-analysis smoothing filter.

The observable return is modeled as instantaneous heavy-tailed
(q-Gaussian, i.e. rescaled Student-t) fluctuations whose scale ``r0`` is
modulated by the windowed average of the slow signed process from the
complex SDE.  A trailing flat-kernel moving average, matching the
one-hour filter applied to empirical minute returns, is provided for use
before burst detection.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.special import gammaln

from .errors import DomainError, ParameterError
from .sde import ComplexSdeParams, Path, SimConfig, simulate


@dataclass(frozen=True)
class QGaussianParams:
    """Scale and tail exponent of the instantaneous fluctuation density.

    The density is normalizable for ``lambda2 > 1`` and has finite
    variance only for ``lambda2 > 3``.
    """

    r0: float
    lambda2: float = 5.0

    def __post_init__(self):
        if self.r0 <= 0:
            raise ParameterError(f"r0 must be positive, got {self.r0}")
        if self.lambda2 <= 1:
            raise ParameterError(f"lambda2 must exceed 1, got {self.lambda2}")


def qgaussian_pdf(r, p: QGaussianParams):
    """Symmetric heavy-tailed density with tail exponent ``lambda2``."""
    r = np.asarray(r, dtype=float)
    lognorm = (gammaln(0.5 * p.lambda2)
               - gammaln(0.5 * p.lambda2 - 0.5)
               - 0.5 * np.log(np.pi) - np.log(p.r0))
    out = np.exp(lognorm + 0.5 * p.lambda2 * np.log(p.r0**2 / (p.r0**2 + r * r)))
    return float(out) if out.ndim == 0 else out


def sample_qgaussian(p: QGaussianParams, rng: np.random.Generator, size=None):
    """Draw from the q-Gaussian via its Student-t representation.

    With ``d = lambda2 - 1`` degrees of freedom, ``r = r0 * t_d / sqrt(d)``
    has exactly the density of :func:`qgaussian_pdf`.
    """
    d = p.lambda2 - 1.0
    return p.r0 * rng.standard_t(d, size=size) / np.sqrt(d)


@dataclass(frozen=True)
class ReturnModelParams:
    """Parameters of the modulated return model.

    complex_params : slow-signal SDE coefficients
    r0_bar  : empirical modulation strength
    tau_s   : averaging window for the modulation, in scaled time
              (default: one minute of real time)
    lambda2 : tail exponent of the instantaneous fluctuations
    """

    complex_params: ComplexSdeParams
    r0_bar: float
    tau_s: float = None
    lambda2: float = 5.0

    def __post_init__(self):
        if self.r0_bar <= 0:
            raise ParameterError(f"r0_bar must be positive, got {self.r0_bar}")
        if self.tau_s is None:
            object.__setattr__(self, "tau_s", 3600.0 * self.complex_params.sigma_t_sq)
        if self.tau_s <= 0:
            raise ParameterError(f"tau_s must be positive, got {self.tau_s}")
        if self.lambda2 <= 1:
            raise ParameterError(f"lambda2 must exceed 1, got {self.lambda2}")

    def fingerprint(self) -> dict:
        d = self.complex_params.fingerprint()
        d.update({"model": "returns", "r0_bar": self.r0_bar,
                  "tau_s": self.tau_s, "lambda2": self.lambda2})
        return d


def _window_averages(t_s, x, starts, tau_s):
    """Mean of the piecewise-linear path over [start, start + tau_s)."""
    cum = np.concatenate(([0.0], cumulative_trapezoid(x, t_s)))
    ends = starts + tau_s
    cum_at = np.interp(starts, t_s, cum), np.interp(ends, t_s, cum)
    return (cum_at[1] - cum_at[0]) / tau_s


def volatility_r0(path: Path, t_s: float, p: ReturnModelParams) -> float:
    """Instantaneous volatility scale from the windowed signal average.

    ``r0 = 1 + r0_bar * |mean of x over [t_s, t_s + tau_s]|``; the unit
    floor keeps the fluctuations alive when the slow signal rests at
    zero.
    """
    if t_s < path.t_s[0] or t_s + p.tau_s > path.t_s[-1]:
        raise DomainError("averaging window falls outside the simulated path")
    avg = _window_averages(path.t_s, path.x, np.array([t_s]), p.tau_s)[0]
    return 1.0 + p.r0_bar * abs(avg)


@dataclass(frozen=True)
class ReturnSeries:
    """Uniformly sampled return series with its provenance."""

    t_seconds: np.ndarray
    r: np.ndarray
    params: dict
    config: dict
    seed_noise: int

    def metadata(self) -> dict:
        return {
            "params": self.params,
            "config": self.config,
            "seed_noise": int(self.seed_noise),
            "n_samples": int(self.r.size),
        }

    def write_csv(self, csv_path, meta_path=None) -> None:
        with open(csv_path, "w") as fh:
            fh.write("t_seconds,r\n")
            np.savetxt(fh, np.column_stack([self.t_seconds, self.r]),
                       fmt="%.10g", delimiter=",")
        if meta_path is None:
            meta_path = str(csv_path) + ".meta.json"
        with open(meta_path, "w") as fh:
            json.dump(self.metadata(), fh, indent=2)
            fh.write("\n")


def simulate_returns(p: ReturnModelParams, cfg: SimConfig,
                     sample_dt: float = 60.0, noise_seed: int = None,
                     x_path: Path = None) -> ReturnSeries:
    """Simulate the double-stochastic return series.

    Runs the complex SDE (unless a pre-computed ``x_path`` is supplied),
    evaluates the volatility scale once per sampling interval of
    ``sample_dt`` physical seconds, and emits one q-Gaussian draw per
    interval.  Determinism is guaranteed by the pair (SDE seed from
    ``cfg``, ``noise_seed``, default ``cfg.seed + 1``).
    """
    if sample_dt <= 0:
        raise ParameterError("sample_dt must be positive")
    if noise_seed is None:
        noise_seed = cfg.seed + 1
    if x_path is None:
        x_path = simulate("complex", p.complex_params, cfg)
    sigma = p.complex_params.sigma_t_sq
    dt_s = sample_dt * sigma
    t0, t1 = x_path.t_s[0], x_path.t_s[-1]
    n = int(np.floor((t1 - t0 - p.tau_s) / dt_s))
    if n < 1:
        raise DomainError("path too short for even one sampling interval")
    starts = t0 + dt_s * np.arange(n)
    r0 = 1.0 + p.r0_bar * np.abs(_window_averages(x_path.t_s, x_path.x, starts, p.tau_s))
    rng = np.random.default_rng(noise_seed)
    qp = QGaussianParams(r0=1.0, lambda2=p.lambda2)
    r = r0 * sample_qgaussian(qp, rng, size=n)
    return ReturnSeries(
        t_seconds=(starts - t0) / sigma,
        r=r,
        params=p.fingerprint(),
        config=cfg.fingerprint(),
        seed_noise=noise_seed,
    )


def moving_average(x, window: float, dt: float = 1.0):
    """Trailing flat-kernel mean over ``window`` (same units as ``dt``).

    The output is defined from the first complete window onward, so it is
    ``k - 1`` samples shorter than the input, with ``k = round(window/dt)``.
    """
    x = np.asarray(x, dtype=float)
    k = int(round(window / dt))
    if k < 1:
        raise DomainError("window must cover at least one sampling step")
    if k > x.size:
        raise DomainError("window longer than the series")
    kernel = np.full(k, 1.0 / k)
    return np.convolve(x, kernel, mode="valid")
