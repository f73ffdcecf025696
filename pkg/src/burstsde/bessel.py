"""First-passage theory for the transformed process.

The nonlinear model with multiplicativity ``eta > 1`` maps, under the
variable change ``y = 1 / ((eta - 1) x**(eta - 1))``, onto a Bessel
process of index ``nu = (lam - 2 eta + 1) / (2 (eta - 1))``.  Excursions
of ``x`` above a threshold ``h_x`` become first passages of ``y`` to
``h_y`` from below, whose density is an eigenfunction series over the
positive zeros of the Bessel function ``J_nu``.  Taking the start point
to the threshold yields the burst-duration density, either as the zero
series (:func:`burst_pdf_series`) or in closed form via the integral
approximation (:func:`burst_pdf_closed`); both diverge as ``t**(-3/2)``
at small ``t`` and are therefore normalized on ``[t_min, inf)``.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq
from scipy.special import erfc, jv

from .errors import DomainError, NumericalError

#: Terms are dropped once their decay factor at t_min is below exp(-_TAIL_LOG).
_TAIL_LOG = 46.0

#: Default hard cap on the number of series terms.
K_TERMS_DEFAULT = 10_000


def lamperti(x, eta: float):
    """Map the signal value ``x > 0`` to the transformed variable ``y``.

    ``y = 1 / ((eta - 1) x**(eta - 1))`` is strictly decreasing, so a
    threshold crossed from below in ``x`` is crossed from above in ``y``.
    """
    if eta <= 1:
        raise DomainError("the transform requires eta > 1")
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise DomainError("lamperti requires x > 0")
    out = 1.0 / ((eta - 1.0) * x ** (eta - 1.0))
    return float(out) if out.ndim == 0 else out


def lamperti_inverse(y, eta: float):
    """Inverse of :func:`lamperti`: ``x = ((eta - 1) y)**(-1/(eta - 1))``."""
    if eta <= 1:
        raise DomainError("the transform requires eta > 1")
    y = np.asarray(y, dtype=float)
    if np.any(y <= 0):
        raise DomainError("lamperti_inverse requires y > 0")
    out = ((eta - 1.0) * y) ** (-1.0 / (eta - 1.0))
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class BesselIndex:
    """Index ``nu`` and dimension ``n_dim = 2 (nu + 1)`` of the process."""

    nu: float
    n_dim: float

    def __post_init__(self):
        if abs(self.n_dim - 2.0 * (self.nu + 1.0)) > 1e-12 * max(1.0, abs(self.n_dim)):
            raise DomainError("n_dim must equal 2*(nu + 1)")


def index_from(eta: float, lam: float) -> BesselIndex:
    """Bessel index for given model exponents; requires ``eta > 1``."""
    if eta <= 1:
        raise DomainError("index is defined for eta > 1 only")
    nu = (lam - 2.0 * eta + 1.0) / (2.0 * (eta - 1.0))
    return BesselIndex(nu=nu, n_dim=2.0 * (nu + 1.0))


def bessel_j(nu: float, x):
    """Bessel function of the first kind ``J_nu(x)`` for ``nu >= 0, x >= 0``."""
    if nu < 0:
        raise DomainError("bessel_j supports nu >= 0 only")
    x = np.asarray(x, dtype=float)
    if np.any(~np.isfinite(x)) or np.any(x < 0):
        raise DomainError("bessel_j requires finite x >= 0")
    out = jv(nu, x)
    return float(out) if out.ndim == 0 else out


_zeros_cache: dict = {}
_zeros_lock = threading.Lock()


def bessel_zeros(nu: float, k_terms: int) -> np.ndarray:
    """First ``k_terms`` positive zeros of ``J_nu``, strictly increasing.

    Zeros are bracketed by a sign scan (their spacing tends to pi and
    never falls much below it in the supported range) and polished by
    Brent's method to 1e-12.  Results are cached per order.
    """
    if nu < 0:
        raise DomainError("bessel_zeros supports nu >= 0 only")
    if k_terms < 1:
        raise DomainError("k_terms must be >= 1")
    key = float(nu)
    with _zeros_lock:
        cached = _zeros_cache.get(key)
    if cached is not None and cached.size >= k_terms:
        return cached[:k_terms].copy()

    # The k-th zero sits near (k + nu/2 - 1/4)*pi for large k; scan with a
    # grid fine enough that no pair of zeros shares a cell.
    upper = (k_terms + 0.5 * nu + 0.25) * np.pi + 10.0
    lo = max(nu, 1e-3)  # J_nu has no zeros at or below its order
    grid = np.arange(lo, upper, 1.0)
    vals = jv(nu, grid)
    sign_change = np.nonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0)[0]
    zeros = []
    for i in sign_change:
        z = brentq(lambda t: jv(nu, t), grid[i], grid[i + 1], xtol=1e-13, rtol=8.9e-16)
        zeros.append(z)
        if len(zeros) >= k_terms:
            break
    if len(zeros) < k_terms:
        raise NumericalError(
            f"found only {len(zeros)} zeros of J_{nu} below {upper:.3g}"
        )
    out = np.asarray(zeros)
    with _zeros_lock:
        prev = _zeros_cache.get(key)
        if prev is None or prev.size < out.size:
            _zeros_cache[key] = out.copy()
    return out


@dataclass(frozen=True)
class FptSpec:
    """Parameters of the burst-duration densities.

    h_y     : transformed threshold (> 0)
    t_min   : lower duration cutoff; the densities are normalized on
              [t_min, inf) because they diverge as t -> 0
    k_terms : cap on the number of series terms
    """

    nu: float
    h_y: float
    t_min: float
    k_terms: int = K_TERMS_DEFAULT

    def __post_init__(self):
        if self.nu < 0:
            raise DomainError("nu must be >= 0")
        if self.h_y <= 0:
            raise DomainError("h_y must be positive")
        if self.t_min <= 0:
            raise DomainError("t_min must be positive")
        if self.k_terms < 1:
            raise DomainError("k_terms must be >= 1")

    @classmethod
    def from_model(cls, eta: float, lam: float, h_x: float,
                   t_min: float = None, kappa: float = 0.1,
                   k_terms: int = K_TERMS_DEFAULT) -> "FptSpec":
        """Build the spec from model exponents and an x-space threshold.

        Defaults ``t_min`` to ``kappa**2``, the smallest step resolvable
        by the integrator near x = 1.
        """
        idx = index_from(eta, lam)
        if t_min is None:
            t_min = kappa**2
        return cls(nu=idx.nu, h_y=lamperti(h_x, eta), t_min=t_min, k_terms=k_terms)


def _effective_terms(nu: float, h_y: float, t_ref: float, k_cap: int) -> np.ndarray:
    """Zeros needed so the dropped tail at ``t_ref`` is below exp(-46)."""
    # j^2 t_ref / (2 h^2) > 46  <=>  j > sqrt(92) h / sqrt(t_ref)
    j_limit = np.sqrt(2.0 * _TAIL_LOG) * h_y / np.sqrt(t_ref)
    k_guess = int(np.ceil(j_limit / np.pi + 2))
    k = min(max(k_guess, 1), k_cap)
    zeros = bessel_zeros(nu, k)
    cut = np.searchsorted(zeros, j_limit, side="right") + 1
    return zeros[: min(cut, k)]


def fpt_density(nu: float, y0: float, h_y: float, t,
                k_terms: int = K_TERMS_DEFAULT):
    """First-passage-time density at level ``h_y`` starting from ``y0``.

    Eigenfunction series over the zeros of ``J_nu``; valid for
    ``0 < y0 < h_y`` and ``t > 0``.
    """
    if not 0 < y0 < h_y:
        raise DomainError("fpt_density requires 0 < y0 < h_y")
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise DomainError("fpt_density requires t > 0")
    zeros = _effective_terms(nu, h_y, float(np.min(t)), k_terms)
    amp = zeros * jv(nu, (y0 / h_y) * zeros) / jv(nu + 1.0, zeros)
    rate = zeros**2 / (2.0 * h_y**2)
    series = np.exp(-np.multiply.outer(t, rate)) @ amp
    out = h_y ** (nu - 2.0) / y0**nu * series
    return float(out) if out.ndim == 0 else out


def _series_zeros_and_c1(spec: FptSpec):
    zeros = _effective_terms(spec.nu, spec.h_y, spec.t_min, spec.k_terms)
    rate = zeros**2 / (2.0 * spec.h_y**2)
    # termwise integral over [t_min, inf): j^2 * exp(-rate t_min) / rate
    total = 2.0 * spec.h_y**2 * np.sum(np.exp(-rate * spec.t_min))
    return zeros, rate, 1.0 / total


def burst_pdf_series(spec: FptSpec, t):
    """Burst-duration density as the zero series, normalized on [t_min, inf)."""
    t = np.asarray(t, dtype=float)
    if np.any(t < spec.t_min):
        raise DomainError("burst_pdf_series is defined for t >= t_min")
    zeros, rate, c1 = _series_zeros_and_c1(spec)
    series = np.exp(-np.multiply.outer(t, rate)) @ (zeros**2)
    out = c1 * series
    return float(out) if out.ndim == 0 else out


def _closed_c2(spec: FptSpec, j1: float) -> float:
    # integral of the closed form over [t_min, inf):
    # 2 h^2 * integral_{j1}^{inf} exp(-u^2 t_min / (2 h^2)) du
    h = spec.h_y
    c = spec.t_min / (2.0 * h**2)
    total = 2.0 * h**2 * 0.5 * np.sqrt(np.pi / c) * erfc(j1 * np.sqrt(c))
    return 1.0 / total


def burst_pdf_closed(spec: FptSpec, t):
    """Burst-duration density in closed form (integral approximation).

    Behaves as ``t**(-3/2)`` well below the crossover time and as
    ``exp(-j1^2 t / (2 h_y^2)) / t`` well above it.
    """
    t = np.asarray(t, dtype=float)
    if np.any(t < spec.t_min):
        raise DomainError("burst_pdf_closed is defined for t >= t_min")
    h = spec.h_y
    j1 = bessel_zeros(spec.nu, 1)[0]
    a = j1**2 / (2.0 * h**2)
    val = (h**2 * j1 * np.exp(-a * t) / t
           + np.sqrt(np.pi / 2.0) * h**3 * erfc(j1 * np.sqrt(t) / (np.sqrt(2.0) * h)) / t**1.5)
    out = _closed_c2(spec, j1) * val
    return float(out) if out.ndim == 0 else out


def normalization_constants(spec: FptSpec):
    """Normalization constants of the series and closed-form densities."""
    _, _, c1 = _series_zeros_and_c1(spec)
    c2 = _closed_c2(spec, bessel_zeros(spec.nu, 1)[0])
    return float(c1), float(c2)


def crossover_time(nu: float, h_y: float) -> float:
    """Duration separating the ``t**(-3/2)`` regime from the exponential tail."""
    if h_y <= 0:
        raise DomainError("h_y must be positive")
    j1 = bessel_zeros(nu, 1)[0]
    return 2.0 * h_y**2 / j1**2
