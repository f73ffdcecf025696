"""Memory-bounded drivers that combine simulation and analysis.

Long realizations (a run to 1e4 bursts can take 1e8 variable steps) do
not fit comfortably in memory as full trajectories.  The helpers here
consume the simulation chunk-wise: burst detection carries the open tail
across chunk joins, so results are identical to running the detector on
the concatenated series, and spectral analysis resamples onto its
uniform grid on the fly.
"""

from __future__ import annotations

import numpy as np

from .bursts import Burst, BurstSequence, LogHistogram, detect_bursts, log_binned_density
from .errors import DomainError, ParameterError
from .sde import ChunkRunner, SimConfig


def simulate_bursts(model: str, params, config: SimConfig,
                    h: float = None, use_abs: bool = None) -> BurstSequence:
    """Simulate and detect bursts without retaining the trajectory.

    ``h`` defaults to the stop-rule threshold.  For the complex model
    the modulus of the signal is analyzed (``use_abs`` overrides).
    Chunked detection stitches excursions across chunk boundaries by
    carrying everything since the last below-threshold sample.
    """
    if h is None:
        h = config.burst_threshold
    if h is None:
        raise ParameterError("a burst threshold is required")
    if use_abs is None:
        use_abs = model == "complex"

    runner = ChunkRunner(model, params, config)
    bursts: list[Burst] = []
    carry_t = np.empty(0)
    carry_x = np.empty(0)
    for t_chunk, x_chunk in runner:
        keep = t_chunk >= config.burn_in
        if not np.any(keep):
            continue
        t = np.concatenate([carry_t, t_chunk[keep]])
        x = np.concatenate([carry_x, np.abs(x_chunk[keep]) if use_abs else x_chunk[keep]])
        below = np.nonzero(x <= h)[0]
        if below.size == 0:
            carry_t, carry_x = t, x  # a burst spans the whole chunk
            continue
        cut = below[-1]
        if cut > 0:
            bursts.extend(detect_bursts(t[: cut + 1], x[: cut + 1], h))
        carry_t, carry_x = t[cut:].copy(), x[cut:].copy()
    if carry_t.size >= 2:
        bursts.extend(detect_bursts(carry_t, carry_x, h))
    return BurstSequence(bursts, h)


def simulate_uniform(model: str, params, config: SimConfig, grid_points: int):
    """Simulate and resample onto a uniform grid by zero-order hold.

    Requires a ``t_max`` stop rule; the grid spans ``[burn_in, t_max)``.
    Returns ``(grid_t, values)``.
    """
    if config.t_max is None:
        raise ParameterError("simulate_uniform requires a t_max stop rule")
    if grid_points < 2:
        raise ParameterError("grid_points must be >= 2")
    grid = np.linspace(config.burn_in, config.t_max, grid_points, endpoint=False)
    values = np.empty(grid_points)
    runner = ChunkRunner(model, params, config)
    pos = 0
    last_x = config.x0
    for t_chunk, x_chunk in runner:
        if pos >= grid_points:
            continue  # drain the runner to its stop condition
        hi = np.searchsorted(grid, t_chunk[-1], side="right")
        hi = min(hi, grid_points)
        if hi > pos:
            idx = np.searchsorted(t_chunk, grid[pos:hi], side="right") - 1
            vals = np.where(idx >= 0, x_chunk[np.clip(idx, 0, None)], last_x)
            values[pos:hi] = vals
            pos = hi
        last_x = x_chunk[-1]
    if pos < grid_points:
        values[pos:] = last_x
    return grid, values


def simulate_weighted_histogram(model: str, params, config: SimConfig,
                                lo: float, hi: float,
                                bins_per_decade: int = 10) -> LogHistogram:
    """Time-weighted amplitude histogram of a streamed run.

    Each sample is weighted by its step duration, which is what makes the
    estimate converge to the stationary density despite the variable
    step (small-step regions would otherwise be oversampled).
    """
    if not 0 < lo < hi:
        raise DomainError("need 0 < lo < hi")
    n_bins = max(1, int(np.ceil((np.log10(hi) - np.log10(lo)) * bins_per_decade)))
    edges = np.logspace(np.log10(lo), np.log10(hi), n_bins + 1)
    wsum = np.zeros(n_bins)
    counts = np.zeros(n_bins, dtype=np.int64)
    total_w = 0.0
    total_n = 0
    runner = ChunkRunner(model, params, config)
    prev_t = config.burn_in
    for t_chunk, x_chunk in runner:
        keep = t_chunk >= config.burn_in
        t = t_chunk[keep]
        x = np.abs(x_chunk[keep])
        if t.size == 0:
            continue
        dt = np.diff(np.concatenate([[prev_t], t]))
        prev_t = t[-1]
        w, _ = np.histogram(x, bins=edges, weights=dt)
        c, _ = np.histogram(x, bins=edges)
        wsum += w
        counts += c
        total_w += dt.sum()
        total_n += t.size
    if total_w <= 0:
        raise DomainError("no samples fell inside the histogram range")
    density = wsum / (total_w * np.diff(edges))
    return LogHistogram(edges=edges, density=density, counts=counts,
                        n_samples=total_n)
