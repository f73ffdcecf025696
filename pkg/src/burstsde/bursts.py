"""Threshold-excursion detection and burst statistics.

A burst is a maximal contiguous excursion of a series above a threshold
``h``.  Crossing times are located by linear interpolation between
adjacent samples, the burst size is the trapezoidal integral of the
excess ``x - h`` over the excursion, and excursions clipped by the ends
of the series are discarded so duration statistics stay unbiased.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import signal as _signal

from .errors import DomainError, ParameterError

_trapezoid = getattr(np, "trapezoid", np.trapz)


@dataclass(frozen=True)
class Burst:
    """One threshold excursion."""

    t_start: float
    t_end: float
    peak: float
    size: float

    @property
    def duration(self) -> float:
        return self.t_end - self.t_start


class BurstSequence:
    """Ordered interior bursts of one series plus derived interval times."""

    def __init__(self, bursts: Sequence[Burst], threshold: float):
        self.bursts = list(bursts)
        self.threshold = float(threshold)

    def __len__(self):
        return len(self.bursts)

    def __iter__(self):
        return iter(self.bursts)

    def __getitem__(self, i):
        return self.bursts[i]

    @property
    def durations(self) -> np.ndarray:
        return np.array([b.duration for b in self.bursts])

    @property
    def peaks(self) -> np.ndarray:
        return np.array([b.peak for b in self.bursts])

    @property
    def sizes(self) -> np.ndarray:
        return np.array([b.size for b in self.bursts])

    @property
    def inter_burst_times(self) -> np.ndarray:
        """Gaps theta between consecutive bursts (end i to start i+1)."""
        starts = np.array([b.t_start for b in self.bursts])
        ends = np.array([b.t_end for b in self.bursts])
        return starts[1:] - ends[:-1]

    @property
    def waiting_times(self) -> np.ndarray:
        """Start-to-start intervals tau = T + theta."""
        starts = np.array([b.t_start for b in self.bursts])
        return np.diff(starts)


def detect_bursts(t, x, h: float) -> BurstSequence:
    """Locate interior excursions of ``x`` above ``h``.

    ``t`` must be strictly increasing.  Equality ``x == h`` counts as
    below threshold.  Accepts a Path-like object in place of ``t`` when
    ``x`` is omitted at the call site via ``detect_bursts(path.t_s,
    path.x, h)``.
    """
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float)
    if t.size != x.size or t.size < 2:
        raise DomainError("series needs at least 2 aligned samples")
    if np.any(np.diff(t) <= 0):
        raise DomainError("t must be strictly increasing")

    above = x > h
    flips = np.nonzero(above[:-1] != above[1:])[0]
    # crossing between samples i and i+1, linear in (t, x)
    cross_t = t[flips] + (h - x[flips]) * (t[flips + 1] - t[flips]) / (x[flips + 1] - x[flips])
    ups = cross_t[~above[flips]]
    downs = cross_t[above[flips]]
    up_idx = flips[~above[flips]]
    down_idx = flips[above[flips]]

    # keep only complete bursts: an up-crossing followed by a down-crossing
    if downs.size and ups.size and downs[0] < ups[0]:
        downs = downs[1:]
        down_idx = down_idx[1:]
    n = min(ups.size, downs.size)
    bursts = []
    for k in range(n):
        i0, i1 = up_idx[k] + 1, down_idx[k] + 1  # sample range strictly above h
        seg_t = np.concatenate(([ups[k]], t[i0:i1], [downs[k]]))
        seg_x = np.concatenate(([0.0], x[i0:i1] - h, [0.0]))
        bursts.append(Burst(
            t_start=float(ups[k]),
            t_end=float(downs[k]),
            peak=float(np.max(x[i0:i1])),
            size=float(_trapezoid(seg_x, seg_t)),
        ))
    return BurstSequence(bursts, h)


@dataclass(frozen=True)
class LogHistogram:
    """Density estimate on logarithmic bins."""

    edges: np.ndarray
    density: np.ndarray
    counts: np.ndarray
    n_samples: int

    @property
    def centers(self) -> np.ndarray:
        """Geometric bin centers."""
        return np.sqrt(self.edges[:-1] * self.edges[1:])

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.edges)


def log_binned_density(samples, bins_per_decade: int = 10,
                       weights=None, lo: float = None, hi: float = None) -> LogHistogram:
    """Normalized density of positive samples on logarithmic bins.

    Optional per-sample ``weights`` produce a weighted density (used for
    time-weighting variable-step trajectories).  Empty bins report zero
    density.
    """
    samples = np.asarray(samples, dtype=float)
    if samples.size < 1:
        raise DomainError("need at least 1 sample")
    if np.any(samples <= 0):
        raise DomainError("log binning requires positive samples")
    if lo is None:
        lo = samples.min()
    if hi is None:
        hi = samples.max()
    if hi <= lo:
        hi = lo * 1.0001
    n_bins = max(1, int(np.ceil((np.log10(hi) - np.log10(lo)) * bins_per_decade)))
    edges = np.logspace(np.log10(lo), np.log10(hi), n_bins + 1)
    edges[0] *= 1 - 1e-12  # make the extreme samples land inside
    edges[-1] *= 1 + 1e-12
    counts, _ = np.histogram(samples, bins=edges)
    wsum, _ = np.histogram(samples, bins=edges, weights=weights)
    total = wsum.sum() if weights is not None else counts.sum()
    if total <= 0:
        raise DomainError("no samples fall inside the binning range")
    density = wsum / (total * np.diff(edges))
    return LogHistogram(edges=edges, density=density,
                        counts=counts, n_samples=int(samples.size))


@dataclass(frozen=True)
class PowerLawFit:
    """Least-squares slope in log-log coordinates."""

    exponent: float
    stderr: float
    lo: float
    hi: float
    r_squared: float
    n_points: int


def fit_power_law(x, y, lo: float = None, hi: float = None) -> PowerLawFit:
    """Fit ``y ~ x**alpha`` over ``[lo, hi]`` by linear regression in logs.

    Points with non-positive ``y`` are ignored; at least 5 usable points
    are required.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if lo is None:
        lo = np.min(x)
    if hi is None:
        hi = np.max(x)
    mask = (x >= lo) & (x <= hi) & (y > 0) & (x > 0)
    if mask.sum() < 5:
        raise DomainError(f"need >= 5 positive points in [{lo:.3g}, {hi:.3g}]")
    lx, ly = np.log(x[mask]), np.log(y[mask])
    n = lx.size
    A = np.column_stack([lx, np.ones(n)])
    coef, res, *_ = np.linalg.lstsq(A, ly, rcond=None)
    slope, intercept = coef
    resid = ly - A @ coef
    ss_res = float(resid @ resid)
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    dof = max(n - 2, 1)
    sxx = float(np.sum((lx - lx.mean()) ** 2))
    stderr = np.sqrt(ss_res / dof / sxx) if sxx > 0 else np.inf
    if ss_res <= 1e-16 * n or ss_tot <= 0:
        r2 = 1.0
    else:
        r2 = 1.0 - ss_res / ss_tot
    return PowerLawFit(exponent=float(slope), stderr=float(max(stderr, 1e-300)),
                       lo=float(lo), hi=float(hi), r_squared=r2, n_points=int(n))


def binned_scatter(a, b, bins_per_decade: int = 10):
    """Log-binned conditional mean and spread of ``b`` given ``a``.

    Returns ``(centers, mean, std, count)`` over occupied bins; used to
    summarize e.g. peak-versus-duration scatter before a power-law fit.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.size != b.size or a.size < 2:
        raise DomainError("need >= 2 aligned pairs")
    if np.any(a <= 0):
        raise DomainError("first coordinate must be positive for log binning")
    n_bins = max(1, int(np.ceil((np.log10(a.max()) - np.log10(a.min())) * bins_per_decade)))
    edges = np.logspace(np.log10(a.min()) - 1e-12, np.log10(a.max()) + 1e-12, n_bins + 1)
    idx = np.digitize(a, edges) - 1
    idx = np.clip(idx, 0, n_bins - 1)
    centers, mean, std, count = [], [], [], []
    for k in range(n_bins):
        sel = idx == k
        if not np.any(sel):
            continue
        centers.append(np.sqrt(edges[k] * edges[k + 1]))
        mean.append(b[sel].mean())
        std.append(b[sel].std(ddof=1) if sel.sum() > 1 else 0.0)
        count.append(int(sel.sum()))
    return (np.asarray(centers), np.asarray(mean),
            np.asarray(std), np.asarray(count))


@dataclass(frozen=True)
class PsdResult:
    """Averaged periodogram with a power-law exponent fit."""

    freq: np.ndarray
    power: np.ndarray
    beta: float
    beta_stderr: float
    fit_lo: float
    fit_hi: float


def psd_estimate(t, x, grid_points: int = 2**20, n_segments: int = 16,
                 fit_band=None) -> PsdResult:
    """Spectral density of a variable-step series with a 1/f^beta fit.

    The series is resampled onto a uniform grid by zero-order hold,
    Welch-averaged over ``n_segments`` segments, and the exponent
    ``beta`` is the negative log-log slope over ``fit_band`` (default:
    two decades centered on the geometric mean of the available
    frequencies).
    """
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float)
    if grid_points < 2 or grid_points & (grid_points - 1):
        raise ParameterError("grid_points must be a power of two")
    if t.size < 2 or t[-1] <= t[0]:
        raise DomainError("series too short for spectral estimation")
    grid = np.linspace(t[0], t[-1], grid_points, endpoint=False)
    # previous-value interpolation: value in force at each grid time
    pos = np.searchsorted(t, grid, side="right") - 1
    xg = x[np.clip(pos, 0, t.size - 1)]
    dt = grid[1] - grid[0]
    nperseg = grid_points // n_segments
    freq, power = _signal.welch(xg, fs=1.0 / dt, nperseg=nperseg,
                                window="hann", detrend="constant")
    freq, power = freq[1:], power[1:]  # drop DC
    if fit_band is None:
        f_geo = np.sqrt(freq[0] * freq[-1])
        fit_band = (f_geo / 10.0, f_geo * 10.0)
    fit = fit_power_law(freq, power, lo=fit_band[0], hi=fit_band[1])
    return PsdResult(freq=freq, power=power, beta=-fit.exponent,
                     beta_stderr=fit.stderr, fit_lo=fit_band[0], fit_hi=fit_band[1])
