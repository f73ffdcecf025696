"""Simulation engine for the nonlinear multiplicative-noise SDE family.

Two stochastic models are supported:

* the "simple" model, a positive process with power-law stationary tail
  ``x**(-lam)`` driven by multiplicative noise ``x**eta``, kept away from
  zero by a compressed-exponential drift restriction at ``x_min``;
* the "complex" model, a signed process whose modulus plays the same role
  but with a crossover parameter ``epsilon`` and an exponential restriction
  at large amplitude ``x_max_cap``.

Both are integrated with a variable time step chosen so that the noise
variance per step is constant, which makes the scheme stable for
multiplicativity exponents well above one.  All times are dimensionless
"scaled" times; physical seconds are recovered as ``t = t_s / sigma_t_sq``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from numba import njit

from .errors import DomainError, ParameterError, SimulationTruncated

#: Empirical time-scale constant for absolute-return modeling, 1/seconds.
SIGMA_T_SQ_EMPIRICAL = 1.0 / 6.0 * 1e-5

#: Reflecting floor, as a fraction of x_min, guarding rare overshoot below zero.
X_FLOOR_FACTOR = 1e-6

#: Name of the pseudo-random generator pinned in output metadata.
GENERATOR_NAME = "numpy-PCG64"

_CHUNK = 1 << 19


@dataclass(frozen=True)
class SdeParams:
    """Coefficients of the restricted simple model.

    eta     : multiplicativity exponent (> 0, != 1 for spectral predictions)
    lam     : stationary power-law exponent (> 1)
    x_min   : restriction point of the diffusion (> 0)
    m       : sharpness of the restriction (integer >= 1)
    x_max   : optional upper restriction point (inf = unrestricted above);
              needed for lam <= 3, where excursions are otherwise unbounded
    sigma_t_sq : scaled-time constant, 1/seconds
    """

    eta: float
    lam: float
    x_min: float = 1.0
    m: int = 2
    x_max: float = math.inf
    sigma_t_sq: float = SIGMA_T_SQ_EMPIRICAL

    def __post_init__(self):
        if self.eta <= 0:
            raise ParameterError(f"eta must be positive, got {self.eta}")
        if self.lam <= 1:
            raise ParameterError(
                f"lam must exceed 1 for a normalizable stationary state, got {self.lam}"
            )
        if self.x_min <= 0:
            raise ParameterError(f"x_min must be positive, got {self.x_min}")
        if self.m < 1 or int(self.m) != self.m:
            raise ParameterError(f"m must be a positive integer, got {self.m}")
        if self.x_max <= self.x_min:
            raise ParameterError(
                f"x_max must exceed x_min, got x_max={self.x_max}, x_min={self.x_min}"
            )
        if self.sigma_t_sq <= 0:
            raise ParameterError(f"sigma_t_sq must be positive, got {self.sigma_t_sq}")

    def fingerprint(self) -> dict:
        return {
            "model": "simple",
            "eta": self.eta,
            "lam": self.lam,
            "x_min": self.x_min,
            "m": int(self.m),
            "x_max": self.x_max if math.isfinite(self.x_max) else "inf",
            "sigma_t_sq": self.sigma_t_sq,
        }


@dataclass(frozen=True)
class ComplexSdeParams:
    """Coefficients of the signed two-regime model.

    epsilon splits the diffusion into low- and high-amplitude regions;
    x_max_cap is the scale of the exponential restriction at large |x|.
    """

    eta: float
    lam: float
    epsilon: float
    x_max_cap: float
    sigma_t_sq: float = SIGMA_T_SQ_EMPIRICAL

    def __post_init__(self):
        if self.eta <= 0:
            raise ParameterError(f"eta must be positive, got {self.eta}")
        if self.lam <= 1:
            raise ParameterError(f"lam must exceed 1, got {self.lam}")
        if self.epsilon < 0:
            raise ParameterError(f"epsilon must be non-negative, got {self.epsilon}")
        if self.x_max_cap <= 1:
            raise ParameterError(f"x_max_cap must exceed 1, got {self.x_max_cap}")
        if self.sigma_t_sq <= 0:
            raise ParameterError(f"sigma_t_sq must be positive, got {self.sigma_t_sq}")

    def fingerprint(self) -> dict:
        return {
            "model": "complex",
            "eta": self.eta,
            "lam": self.lam,
            "epsilon": self.epsilon,
            "x_max_cap": self.x_max_cap,
            "sigma_t_sq": self.sigma_t_sq,
        }


@dataclass(frozen=True)
class SimConfig:
    """Run configuration for :func:`simulate`.

    Exactly one stop rule must be set: either ``target_bursts`` together
    with ``burst_threshold`` (stop after that many completed excursions
    above the threshold, counted past burn-in), or ``t_max`` (stop once
    scaled time exceeds it; bursts may also be counted if a threshold is
    given).  ``max_steps`` is a hard cap; hitting it raises
    :class:`SimulationTruncated`.
    """

    seed: int
    kappa: float = 0.1
    x0: float = 1.0
    burn_in: float = 1e3
    target_bursts: Optional[int] = None
    burst_threshold: Optional[float] = None
    t_max: Optional[float] = None
    max_steps: int = 10**10

    def __post_init__(self):
        if not 0 < self.kappa <= 0.5:
            raise ParameterError(f"kappa must lie in (0, 0.5], got {self.kappa}")
        if self.burn_in < 0:
            raise ParameterError(f"burn_in must be non-negative, got {self.burn_in}")
        if self.target_bursts is None and self.t_max is None:
            raise ParameterError("either target_bursts or t_max must be set")
        if self.target_bursts is not None:
            if self.target_bursts < 1:
                raise ParameterError("target_bursts must be >= 1")
            if self.burst_threshold is None:
                raise ParameterError("target_bursts requires burst_threshold")
        if self.max_steps < 1:
            raise ParameterError("max_steps must be >= 1")

    def fingerprint(self) -> dict:
        return {
            "seed": int(self.seed),
            "kappa": self.kappa,
            "x0": self.x0,
            "burn_in": self.burn_in,
            "target_bursts": self.target_bursts,
            "burst_threshold": self.burst_threshold,
            "t_max": self.t_max,
            "max_steps": int(self.max_steps),
        }


@dataclass(frozen=True)
class Path:
    """A variable-step trajectory of one simulation run.

    ``t_s`` is strictly increasing scaled time, ``x`` the signal value
    (positive for the simple model, signed for the complex one).  The
    fingerprint stores enough metadata to re-create the run bit for bit.
    """

    t_s: np.ndarray
    x: np.ndarray
    params: dict
    config: dict
    step_count: int
    burst_count: int = 0
    generator: str = GENERATOR_NAME

    @property
    def t_seconds(self) -> np.ndarray:
        """Times of the samples in physical seconds."""
        return self.t_s / self.params["sigma_t_sq"]

    @property
    def duration(self) -> float:
        return float(self.t_s[-1] - self.t_s[0]) if self.t_s.size else 0.0

    def metadata(self) -> dict:
        return {
            "params": self.params,
            "config": self.config,
            "generator": self.generator,
            "step_count": int(self.step_count),
            "burst_count": int(self.burst_count),
            "n_samples": int(self.t_s.size),
        }

    def write_csv(self, csv_path, meta_path=None) -> None:
        """Write samples as ``t_s,x`` CSV plus a JSON metadata sidecar."""
        with open(csv_path, "w") as fh:
            fh.write("t_s,x\n")
            np.savetxt(fh, np.column_stack([self.t_s, self.x]), fmt="%.12g", delimiter=",")
        if meta_path is None:
            meta_path = str(csv_path) + ".meta.json"
        with open(meta_path, "w") as fh:
            json.dump(self.metadata(), fh, indent=2)
            fh.write("\n")


# ---------------------------------------------------------------------------
# pointwise coefficient functions

def drift_simple(x, p: SdeParams):
    """Drift of the restricted simple model, per unit scaled time."""
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise DomainError("drift_simple requires x > 0")
    restr = 0.5 * p.m * ((p.x_min / x) ** p.m - (x / p.x_max) ** p.m)
    return (p.eta - 0.5 * p.lam + restr) * x ** (2.0 * p.eta - 1.0)


def diffusion_simple(x, p: SdeParams):
    """Noise amplitude of the simple model, per square-root scaled time."""
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise DomainError("diffusion_simple requires x > 0")
    return x**p.eta


def drift_complex(x, p: ComplexSdeParams):
    """Drift of the signed two-regime model."""
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise DomainError("drift_complex requires finite x")
    s = np.sqrt(1.0 + x * x)
    bracket = p.eta - 0.5 * p.lam - (x / p.x_max_cap) ** 2
    return bracket * (1.0 + x * x) ** (p.eta - 1.0) / (p.epsilon * s + 1.0) ** 2 * x


def diffusion_complex(x, p: ComplexSdeParams):
    """Noise amplitude of the signed two-regime model."""
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise DomainError("diffusion_complex requires finite x")
    s = np.sqrt(1.0 + x * x)
    return (1.0 + x * x) ** (0.5 * p.eta) / (p.epsilon * s + 1.0)


def step_adaptive(x: float, p: SdeParams, kappa: float, zeta: float):
    """One variable-step Euler-Maruyama update of the simple model.

    The step ``dt_s = kappa**2 / x**(2*eta - 2)`` equalizes the noise
    variance per step, so the update reads
    ``x + kappa**2 * (eta - lam/2 + (m/2)(x_min/x)**m) * x + kappa * x * zeta``.
    Values at or below the reflecting floor are folded back above it.

    Returns ``(x_next, dt_s)``.
    """
    if x <= 0:
        raise DomainError("step_adaptive requires x > 0")
    dt_s = kappa**2 * x ** (2.0 - 2.0 * p.eta)
    restr = 0.5 * p.m * ((p.x_min / x) ** p.m - (x / p.x_max) ** p.m)
    x_next = x + kappa**2 * (p.eta - 0.5 * p.lam + restr) * x + kappa * x * zeta
    floor = X_FLOOR_FACTOR * p.x_min
    if x_next <= floor:
        x_next = 2.0 * floor - x_next
    return x_next, dt_s


def stationary_pdf(x, p: SdeParams):
    """Stationary probability density of the restricted simple model."""
    from scipy.special import gamma as _gamma

    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise DomainError("stationary_pdf requires x > 0")
    if p.lam <= 1:
        raise ParameterError("stationary_pdf needs lam > 1 for normalization")
    if math.isfinite(p.x_max):
        from scipy.integrate import quad

        def shape(u):
            return np.exp(-((p.x_min / u) ** p.m) - (u / p.x_max) ** p.m) * u ** (-p.lam)

        norm = 1.0 / quad(shape, 0.0, np.inf, limit=200)[0]
        return norm * shape(x)
    norm = p.m * p.x_min ** (p.lam - 1.0) / _gamma((p.lam - 1.0) / p.m)
    return norm * np.exp(-((p.x_min / x) ** p.m)) * x ** (-p.lam)


def spectral_beta(p: SdeParams) -> float:
    """Predicted power-spectral-density exponent ``beta``.

    Defined only for ``eta != 1``; ``lam = 3`` gives pure 1/f noise.
    """
    if p.eta == 1.0:
        raise DomainError("beta is defined only for eta != 1")
    return 1.0 + (p.lam - 3.0) / (2.0 * (p.eta - 1.0))


# ---------------------------------------------------------------------------
# compiled kernels

@njit(cache=True)
def _chunk_simple(rng, state, eta, lam, x_min, m, x_max, kappa, x_floor,
                  h, burn_in, bursts_wanted, t_max, tbuf, xbuf):
    # state[2]: 0 = below threshold (armed), 1 = inside a burst,
    # 2 = not yet armed (no below-threshold sample seen past burn-in),
    # so a burst already in progress at burn-in is never counted.
    x = state[0]
    t = state[1]
    phase = int(state[2])
    k2 = kappa * kappa
    n = 0
    bursts = 0
    done = 0
    for i in range(tbuf.shape[0]):
        dt = k2 * x ** (2.0 - 2.0 * eta)
        restr = 0.5 * m * ((x_min / x) ** m - (x / x_max) ** m)
        x = x + k2 * (eta - 0.5 * lam + restr) * x + kappa * x * rng.standard_normal()
        if x <= x_floor:
            x = 2.0 * x_floor - x
        t_next = t + dt
        if t_next <= t:
            # dt below float resolution of t (huge x => tiny step);
            # nudge so time stays strictly increasing
            t_next = t * (1.0 + 2.3e-16)
        t = t_next
        tbuf[i] = t
        xbuf[i] = x
        n = i + 1
        if h > 0.0 and t >= burn_in:
            if phase == 1:
                if x <= h:
                    phase = 0
                    bursts += 1
                    if bursts_wanted > 0 and bursts >= bursts_wanted:
                        done = 1
                        break
            elif x <= h:
                phase = 0
            elif phase == 0:
                phase = 1
        if t_max > 0.0 and t >= t_max:
            done = 1
            break
    state[0] = x
    state[1] = t
    state[2] = float(phase)
    return n, bursts, done


@njit(cache=True)
def _chunk_complex(rng, state, eta, lam, eps, x_cap, kappa,
                   h, burn_in, bursts_wanted, t_max, tbuf, xbuf):
    x = state[0]
    t = state[1]
    phase = int(state[2])
    k2 = kappa * kappa
    n = 0
    bursts = 0
    done = 0
    for i in range(tbuf.shape[0]):
        x2 = x * x
        dt = k2 * (1.0 + x2) ** (1.0 - eta)
        s = math.sqrt(1.0 + x2)
        denom = eps * s + 1.0
        drift = (eta - 0.5 * lam - (x / x_cap) ** 2) * (1.0 + x2) ** (eta - 1.0) / (denom * denom) * x
        diff = (1.0 + x2) ** (0.5 * eta) / denom
        x = x + drift * dt + diff * math.sqrt(dt) * rng.standard_normal()
        t_next = t + dt
        if t_next <= t:
            t_next = t * (1.0 + 2.3e-16)
        t = t_next
        tbuf[i] = t
        xbuf[i] = x
        n = i + 1
        if h > 0.0 and t >= burn_in:
            if phase == 1:
                if abs(x) <= h:
                    phase = 0
                    bursts += 1
                    if bursts_wanted > 0 and bursts >= bursts_wanted:
                        done = 1
                        break
            elif abs(x) <= h:
                phase = 0
            elif phase == 0:
                phase = 1
        if t_max > 0.0 and t >= t_max:
            done = 1
            break
    state[0] = x
    state[1] = t
    state[2] = float(phase)
    return n, bursts, done


@njit(cache=True)
def _bessel_fpt_chunk(rng, nu, y0, h_y, c_step, t_floor_keep, out, max_steps):
    """Repeated first-passage runs of the transformed (Bessel) process.

    Each run starts at ``y0`` just below the absorbing level ``h_y`` and
    integrates dy = (nu + 1/2)/y dt + dW with the variance-equalizing step
    dt = c_step * y**2 until the level is crossed; the crossing time is
    refined by linear interpolation.  Passage times below ``t_floor_keep``
    are discarded (unresolvable at this discretization).  Returns the
    number of kept samples and the number of steps consumed.
    """
    kept = 0
    steps = 0
    drift_c = nu + 0.5
    y = y0
    t = 0.0
    while kept < out.shape[0] and steps < max_steps:
        dt = c_step * y * y
        y_new = y + drift_c / y * dt + math.sqrt(dt) * rng.standard_normal()
        if y_new <= 0.0:
            y_new = -y_new
        t_new = t + dt
        steps += 1
        if y_new >= h_y:
            frac = (h_y - y) / (y_new - y)
            t_hit = t + frac * dt
            if t_hit >= t_floor_keep:
                out[kept] = t_hit
                kept += 1
            y = y0
            t = 0.0
        else:
            y = y_new
            t = t_new
    return kept, steps


@njit(cache=True)
def _sde_fpt_chunk(rng, eta, lam, x_min, m, x_max, kappa, x0, h_x,
                   t_floor_keep, out, max_steps):
    """Repeated first-passage runs of the untransformed model.

    Mirror of :func:`_bessel_fpt_chunk` in the original coordinates: each
    run starts at ``x0`` just above the threshold ``h_x`` and integrates
    the variable-step scheme until the path falls back to the threshold;
    the crossing time is refined by linear interpolation.
    """
    kept = 0
    steps = 0
    k2 = kappa * kappa
    x = x0
    t = 0.0
    while kept < out.shape[0] and steps < max_steps:
        dt = k2 * x ** (2.0 - 2.0 * eta)
        restr = 0.5 * m * ((x_min / x) ** m - (x / x_max) ** m)
        x_new = x + k2 * (eta - 0.5 * lam + restr) * x + kappa * x * rng.standard_normal()
        t_new = t + dt
        steps += 1
        if x_new <= h_x:
            frac = (x - h_x) / (x - x_new)
            t_hit = t + frac * dt
            if t_hit >= t_floor_keep:
                out[kept] = t_hit
                kept += 1
            x = x0
            t = 0.0
        else:
            x = x_new
            t = t_new
    return kept, steps


def sde_fpt_samples(params: SdeParams, h_x: float, n_samples: int, seed: int,
                    kappa: float = 0.1, t_floor: float = 0.0,
                    max_steps: int = 10**10,
                    x0: Optional[float] = None) -> np.ndarray:
    """Burst durations of the untransformed model by the restart protocol.

    Starts each run at ``x0`` (default: a hair above ``h_x``) and records
    the interpolated time of return to the threshold, matching the
    protocol of :func:`bessel_fpt_samples` so the two distributions can be
    compared sample for sample.  Samples shorter than ``t_floor`` are
    discarded.  Returns ``n_samples`` passage times.
    """
    if h_x <= 0:
        raise DomainError("h_x must be positive")
    if x0 is None:
        x0 = h_x * (1.0 + 1e-6)
    if x0 <= h_x:
        raise DomainError("x0 must exceed h_x")
    rng = np.random.default_rng(seed)
    out = np.empty(n_samples)
    kept, steps = _sde_fpt_chunk(
        rng, params.eta, params.lam, params.x_min, float(params.m),
        params.x_max, kappa, x0, h_x, t_floor, out, max_steps,
    )
    if kept < n_samples:
        raise SimulationTruncated(
            f"only {kept}/{n_samples} passage times within {max_steps} steps"
        )
    return out


class ChunkRunner:
    """Iterates one seeded realization in fixed-size chunks.

    Yields ``(t_chunk, x_chunk)`` arrays of raw samples (burn-in included)
    so long runs can be analyzed without holding the whole trajectory.
    Step and burst totals are available on the instance after exhaustion.
    """

    def __init__(self, model: str, params, config: SimConfig):
        if model == "simple":
            if not isinstance(params, SdeParams):
                raise ParameterError("simple model requires SdeParams")
            if config.x0 <= X_FLOOR_FACTOR * params.x_min:
                raise ParameterError("x0 must lie above the reflecting floor")
        elif model == "complex":
            if not isinstance(params, ComplexSdeParams):
                raise ParameterError("complex model requires ComplexSdeParams")
        else:
            raise ParameterError(f"unknown model {model!r}")
        self.model = model
        self.params = params
        self.config = config
        self.step_count = 0
        self.burst_count = 0

    def __iter__(self):
        config, params = self.config, self.params
        rng = np.random.default_rng(config.seed)
        state = np.array([config.x0, 0.0, 2.0])  # start unarmed for burst counting
        h = config.burst_threshold if config.burst_threshold is not None else -1.0
        t_max = config.t_max if config.t_max is not None else -1.0
        wanted = config.target_bursts if config.target_bursts is not None else -1
        done = False
        while not done:
            size = min(_CHUNK, config.max_steps - self.step_count)
            if size <= 0:
                raise SimulationTruncated(
                    f"stop condition not reached within {config.max_steps} steps "
                    f"(t_s={state[1]:.6g}, bursts={self.burst_count})"
                )
            tbuf = np.empty(size)
            xbuf = np.empty(size)
            remaining = wanted - self.burst_count if wanted > 0 else -1
            if self.model == "simple":
                n, bursts, flag = _chunk_simple(
                    rng, state, params.eta, params.lam, params.x_min, float(params.m),
                    params.x_max, config.kappa, X_FLOOR_FACTOR * params.x_min,
                    h, config.burn_in, remaining, t_max, tbuf, xbuf,
                )
            else:
                n, bursts, flag = _chunk_complex(
                    rng, state, params.eta, params.lam, params.epsilon, params.x_max_cap,
                    config.kappa, h, config.burn_in, remaining, t_max, tbuf, xbuf,
                )
            self.step_count += n
            self.burst_count += bursts
            done = bool(flag)
            yield tbuf[:n], xbuf[:n]


def simulate(model: str, params, config: SimConfig) -> Path:
    """Run one seeded realization and return its :class:`Path`.

    ``model`` is ``"simple"`` (positive process, :class:`SdeParams`) or
    ``"complex"`` (signed process, :class:`ComplexSdeParams`).  Samples
    with ``t_s < burn_in`` are discarded; burst counting for the stop rule
    also starts after burn-in and, for the complex model, applies to |x|.
    """
    runner = ChunkRunner(model, params, config)
    t_parts, x_parts = [], []
    for t_chunk, x_chunk in runner:
        keep = t_chunk >= config.burn_in
        t_parts.append(t_chunk[keep])
        x_parts.append(x_chunk[keep])
    return Path(
        t_s=np.concatenate(t_parts),
        x=np.concatenate(x_parts),
        params=params.fingerprint(),
        config=config.fingerprint(),
        step_count=runner.step_count,
        burst_count=runner.burst_count,
    )


def bessel_fpt_samples(nu: float, h_y: float, n_samples: int, seed: int,
                       kappa: float = 0.1, eta: float = 2.0,
                       t_floor: float = 0.0, max_steps: int = 10**10,
                       y0: Optional[float] = None) -> np.ndarray:
    """Direct first-passage sampling of the transformed process.

    Integrates dy = (nu + 1/2)/y dt + dW from ``y0`` (default: a hair
    below ``h_y``) to the absorbing level with the step rule
    ``dt = kappa**2 (eta-1)**2 y**2`` that mirrors the variable-step
    scheme of the untransformed model.  Samples shorter than ``t_floor``
    are discarded.  Returns ``n_samples`` passage times.
    """
    if h_y <= 0:
        raise DomainError("h_y must be positive")
    if y0 is None:
        y0 = h_y * (1.0 - 1e-6)
    if not 0 < y0 < h_y:
        raise DomainError("y0 must lie in (0, h_y)")
    rng = np.random.default_rng(seed)
    out = np.empty(n_samples)
    c_step = kappa**2 * (eta - 1.0) ** 2
    kept, steps = _bessel_fpt_chunk(rng, nu, y0, h_y, c_step, t_floor, out, max_steps)
    if kept < n_samples:
        raise SimulationTruncated(
            f"only {kept}/{n_samples} passage times within {max_steps} steps"
        )
    return out
