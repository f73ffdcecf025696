"""Command-line front end.

Subcommands
-----------
simulate : run one SDE realization and write the path CSV + metadata
analyze  : burst statistics, histograms, scatters, PSD and analytic overlay
fpt      : evaluate the analytic burst-duration densities on a grid
returns  : double-stochastic return series plus the hour-filtered modulus
verify   : re-run a simulation from its metadata and compare checksums

All CSVs begin with a ``# config_hash=...`` comment so any artifact can
be traced to the exact configuration that produced it.  External time
columns are physical seconds (header ``t_seconds``); internal scaled
time uses header ``t_s``.

Exit codes: 0 success, 2 validation error, 3 I/O error, 4 numerical
failure.
"""

from __future__ import annotations

import functools
import hashlib
import json
import sys

import click
import numpy as np

from . import bessel, bursts, returns as returns_mod, sde
from .errors import DomainError, NumericalError, ParameterError


def config_hash(cfg: dict) -> str:
    """Stable short hash of a fully serialized configuration."""
    blob = json.dumps(cfg, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def _write_csv(path, header, columns, cfg_hash, fmt="%.12g"):
    with open(path, "w") as fh:
        fh.write(f"# config_hash={cfg_hash}\n")
        fh.write(",".join(header) + "\n")
        np.savetxt(fh, np.column_stack(columns), fmt=fmt, delimiter=",")


def read_series_csv(path, sigma_t_sq):
    """Read a ``t_s,x`` or ``t_seconds,x`` CSV into scaled time.

    Raises a parse error naming the first offending line.
    """
    times, values = [], []
    header = None
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if header is None:
                header = [c.strip() for c in line.split(",")]
                if len(header) != 2 or header[0] not in ("t_s", "t_seconds"):
                    raise DomainError(
                        f"{path}:{lineno}: expected header 't_s,x' or 't_seconds,x', "
                        f"got {line!r}"
                    )
                continue
            parts = line.split(",")
            try:
                times.append(float(parts[0]))
                values.append(float(parts[1]))
            except (ValueError, IndexError):
                raise DomainError(f"{path}:{lineno}: malformed row {line!r}") from None
    if header is None or not times:
        raise DomainError(f"{path}: no data rows")
    t = np.asarray(times)
    if header[0] == "t_seconds":
        t = t * sigma_t_sq
    return t, np.asarray(values)


def _exit_codes(func):
    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except (ParameterError, DomainError) as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(2)
        except OSError as exc:
            click.echo(f"i/o error: {exc}", err=True)
            sys.exit(3)
        except NumericalError as exc:
            click.echo(f"numerical failure: {exc}", err=True)
            sys.exit(4)

    return wrapper


@click.group()
def cli():
    """Bursty nonlinear-SDE simulation and first-passage analysis toolkit."""


_model_opts = [
    click.option("--eta", type=float, required=True, help="multiplicativity exponent"),
    click.option("--lam", type=float, required=True, help="stationary PDF exponent"),
    click.option("--sigma-t-sq", type=float, default=sde.SIGMA_T_SQ_EMPIRICAL,
                 show_default=True, help="scaled-time constant, 1/s"),
]


def _add_opts(opts):
    def deco(f):
        for opt in reversed(opts):
            f = opt(f)
        return f
    return deco


@cli.command()
@_add_opts(_model_opts)
@click.option("--model", type=click.Choice(["simple", "complex"]), default="simple",
              show_default=True)
@click.option("--x-min", type=float, default=1.0, show_default=True)
@click.option("--m", type=int, default=2, show_default=True)
@click.option("--x-max", type=float, default=float("inf"), show_default=True,
              help="simple model upper restriction point (inf = none)")
@click.option("--epsilon", type=float, default=0.017, show_default=True,
              help="complex model crossover parameter")
@click.option("--x-max-cap", type=float, default=1e3, show_default=True,
              help="complex model restriction scale")
@click.option("--kappa", type=float, default=0.1, show_default=True)
@click.option("--x0", type=float, default=1.0, show_default=True)
@click.option("--burn-in", type=float, default=1e3, show_default=True)
@click.option("--seed", type=int, required=True)
@click.option("--bursts", "target_bursts", type=int, default=None,
              help="stop after this many bursts above --h")
@click.option("--h", "threshold", type=float, default=None,
              help="burst threshold for the stop rule")
@click.option("--t-max", type=float, default=None, help="stop at this scaled time")
@click.option("--max-steps", type=int, default=10**10, show_default=True)
@click.option("--out", type=click.Path(), required=True, help="output CSV path")
@_exit_codes
def simulate(model, eta, lam, sigma_t_sq, x_min, m, x_max, epsilon, x_max_cap, kappa,
             x0, burn_in, seed, target_bursts, threshold, t_max, max_steps, out):
    """Run one seeded realization and write `t_s,x` CSV plus metadata."""
    if model == "simple":
        params = sde.SdeParams(eta=eta, lam=lam, x_min=x_min, m=m, x_max=x_max,
                               sigma_t_sq=sigma_t_sq)
    else:
        params = sde.ComplexSdeParams(eta=eta, lam=lam, epsilon=epsilon,
                                      x_max_cap=x_max_cap, sigma_t_sq=sigma_t_sq)
    cfg = sde.SimConfig(seed=seed, kappa=kappa, x0=x0, burn_in=burn_in,
                        target_bursts=target_bursts, burst_threshold=threshold,
                        t_max=t_max, max_steps=max_steps)
    path = sde.simulate(model, params, cfg)
    meta = path.metadata()
    meta["config_hash"] = config_hash({"params": meta["params"], "config": meta["config"]})
    _write_csv(out, ["t_s", "x"], [path.t_s, path.x], meta["config_hash"])
    with open(str(out) + ".meta.json", "w") as fh:
        json.dump(meta, fh, indent=2)
        fh.write("\n")
    click.echo(f"wrote {out} ({path.t_s.size} samples, {path.burst_count} bursts, "
               f"hash {meta['config_hash']})")


@cli.command()
@click.option("--input", "input_path", type=click.Path(exists=True), required=True)
@click.option("--h", "threshold", type=float, required=True, help="burst threshold")
@click.option("--eta", type=float, default=None, help="enables the analytic overlay")
@click.option("--lam", type=float, default=None, help="enables the analytic overlay")
@click.option("--kappa", type=float, default=0.1, show_default=True,
              help="sets the analytic cutoff t_min = kappa^2")
@click.option("--sigma-t-sq", type=float, default=sde.SIGMA_T_SQ_EMPIRICAL,
              show_default=True)
@click.option("--bins-per-decade", type=int, default=10, show_default=True)
@click.option("--psd/--no-psd", default=True, show_default=True)
@click.option("--grid-points", type=int, default=2**18, show_default=True)
@click.option("--out", type=click.Path(), required=True, help="output prefix")
@_exit_codes
def analyze(input_path, threshold, eta, lam, kappa, sigma_t_sq, bins_per_decade,
            psd, grid_points, out):
    """Burst statistics of a series: histograms, scatters, fits, PSD."""
    t, x = read_series_csv(input_path, sigma_t_sq)
    cfg = {
        "input": str(input_path), "h": threshold, "eta": eta, "lam": lam,
        "kappa": kappa, "sigma_t_sq": sigma_t_sq,
        "bins_per_decade": bins_per_decade, "grid_points": grid_points,
    }
    chash = config_hash(cfg)
    seq = bursts.detect_bursts(t, np.abs(x), threshold)
    summary = {"config": cfg, "config_hash": chash, "n_bursts": len(seq)}

    if len(seq) >= 10:
        hist = bursts.log_binned_density(seq.durations, bins_per_decade)
        cols = [hist.centers, hist.density, hist.counts.astype(float)]
        header = ["duration", "density", "count"]
        if eta is not None and lam is not None and eta > 1:
            spec = bessel.FptSpec.from_model(eta, lam, threshold, kappa=kappa)
            grid = np.maximum(hist.centers, spec.t_min)
            header += ["p_series", "p_closed"]
            cols += [bessel.burst_pdf_series(spec, grid),
                     bessel.burst_pdf_closed(spec, grid)]
            summary["fpt"] = {"nu": spec.nu, "h_y": spec.h_y, "t_min": spec.t_min}
        _write_csv(f"{out}.durations.csv", header, cols, chash)

    if len(seq) >= 100:
        for name, a, b in (("peak_vs_T", seq.durations, seq.peaks),
                           ("size_vs_T", seq.durations, seq.sizes),
                           ("size_vs_peak", seq.peaks, seq.sizes)):
            c, mean, std, count = bursts.binned_scatter(a, b, bins_per_decade)
            _write_csv(f"{out}.scatter_{name}.csv",
                       ["bin_center", "mean", "std", "count"],
                       [c, mean, std, count.astype(float)], chash)
            good = count >= 5
            if good.sum() >= 5:
                fit = bursts.fit_power_law(c[good], mean[good])
                summary[f"fit_{name}"] = {"alpha": fit.exponent, "stderr": fit.stderr,
                                          "r_squared": fit.r_squared}

    if psd:
        res = bursts.psd_estimate(t, x, grid_points=grid_points)
        _write_csv(f"{out}.psd.csv", ["frequency", "power"],
                   [res.freq, res.power], chash)
        summary["psd"] = {"beta": res.beta, "stderr": res.beta_stderr,
                          "fit_band": [res.fit_lo, res.fit_hi]}

    with open(f"{out}.summary.json", "w") as fh:
        json.dump(summary, fh, indent=2, default=float)
        fh.write("\n")
    click.echo(f"analyzed {len(seq)} bursts (hash {chash})")


@cli.command()
@click.option("--eta", type=float, required=True)
@click.option("--lam", type=float, required=True)
@click.option("--h-x", type=float, required=True, help="threshold in signal units")
@click.option("--t-min", type=float, default=None, help="duration cutoff (default kappa^2)")
@click.option("--kappa", type=float, default=0.1, show_default=True)
@click.option("--k-terms", type=int, default=bessel.K_TERMS_DEFAULT, show_default=True)
@click.option("--decades", type=float, default=4.0, show_default=True,
              help="grid extent above t_min in decades")
@click.option("--points", type=int, default=200, show_default=True)
@click.option("--out", type=click.Path(), required=True, help="output CSV path")
@_exit_codes
def fpt(eta, lam, h_x, t_min, kappa, k_terms, decades, points, out):
    """Evaluate the analytic burst-duration densities on a log grid."""
    spec = bessel.FptSpec.from_model(eta, lam, h_x, t_min=t_min,
                                     kappa=kappa, k_terms=k_terms)
    c1, c2 = bessel.normalization_constants(spec)
    grid = np.logspace(np.log10(spec.t_min), np.log10(spec.t_min) + decades, points)
    grid[0] = spec.t_min
    cfg = {"eta": eta, "lam": lam, "h_x": h_x, "nu": spec.nu, "h_y": spec.h_y,
           "t_min": spec.t_min, "k_terms": k_terms, "C1": c1, "C2": c2}
    chash = config_hash(cfg)
    _write_csv(out, ["t", "p_series", "p_closed"],
               [grid, bessel.burst_pdf_series(spec, grid),
                bessel.burst_pdf_closed(spec, grid)], chash)
    with open(str(out) + ".meta.json", "w") as fh:
        json.dump({**cfg, "config_hash": chash}, fh, indent=2)
        fh.write("\n")
    click.echo(f"wrote {out} (nu={spec.nu:.4g}, h_y={spec.h_y:.6g}, hash {chash})")


@cli.command()
@_add_opts(_model_opts)
@click.option("--epsilon", type=float, default=0.017, show_default=True)
@click.option("--x-max-cap", type=float, default=1e3, show_default=True)
@click.option("--r0-bar", type=float, default=0.4, show_default=True)
@click.option("--lambda2", type=float, default=5.0, show_default=True)
@click.option("--sample-dt", type=float, default=60.0, show_default=True,
              help="sampling interval, seconds")
@click.option("--filter-window", type=float, default=3600.0, show_default=True,
              help="moving-average window, seconds")
@click.option("--kappa", type=float, default=0.1, show_default=True)
@click.option("--burn-in", type=float, default=1e3, show_default=True)
@click.option("--t-max", type=float, required=True, help="run length, scaled time")
@click.option("--seed", type=int, required=True)
@click.option("--noise-seed", type=int, default=None,
              help="q-Gaussian stream seed (default seed+1)")
@click.option("--out", type=click.Path(), required=True, help="output prefix")
@_exit_codes
def returns(eta, lam, sigma_t_sq, epsilon, x_max_cap, r0_bar, lambda2, sample_dt,
            filter_window, kappa, burn_in, t_max, seed, noise_seed, out):
    """Simulate the double-stochastic return model and its filtered modulus."""
    cparams = sde.ComplexSdeParams(eta=eta, lam=lam, epsilon=epsilon,
                                   x_max_cap=x_max_cap, sigma_t_sq=sigma_t_sq)
    rparams = returns_mod.ReturnModelParams(complex_params=cparams, r0_bar=r0_bar,
                                            lambda2=lambda2)
    cfg = sde.SimConfig(seed=seed, kappa=kappa, burn_in=burn_in, x0=0.0, t_max=t_max)
    series = returns_mod.simulate_returns(rparams, cfg, sample_dt=sample_dt,
                                          noise_seed=noise_seed)
    meta = series.metadata()
    chash = config_hash({"params": meta["params"], "config": meta["config"],
                         "seed_noise": meta["seed_noise"], "sample_dt": sample_dt})
    _write_csv(f"{out}.returns.csv", ["t_seconds", "r"],
               [series.t_seconds, series.r], chash, fmt="%.10g")
    smooth = returns_mod.moving_average(np.abs(series.r), filter_window, sample_dt)
    k = series.r.size - smooth.size
    _write_csv(f"{out}.filtered.csv", ["t_seconds", "abs_r_smoothed"],
               [series.t_seconds[k:], smooth], chash, fmt="%.10g")
    meta["config_hash"] = chash
    meta["filter_window_seconds"] = filter_window
    with open(f"{out}.meta.json", "w") as fh:
        json.dump(meta, fh, indent=2)
        fh.write("\n")
    click.echo(f"wrote {out}.returns.csv ({series.r.size} samples, hash {chash})")


@cli.command()
@click.option("--meta", "meta_path", type=click.Path(exists=True), required=True,
              help="metadata JSON of a simulate run")
@click.option("--csv", "csv_path", type=click.Path(exists=True), required=True,
              help="the CSV produced by that run")
@_exit_codes
def verify(meta_path, csv_path):
    """Re-run a recorded simulation and compare output checksums."""
    with open(meta_path) as fh:
        meta = json.load(fh)
    params_d = dict(meta["params"])
    model = params_d.pop("model")
    if params_d.get("x_max") == "inf":
        params_d["x_max"] = float("inf")
    cfg_d = dict(meta["config"])
    if model == "simple":
        params = sde.SdeParams(**params_d)
    elif model == "complex":
        params = sde.ComplexSdeParams(**params_d)
    else:
        raise DomainError(f"cannot verify model {model!r}")
    path = sde.simulate(model, params, sde.SimConfig(**cfg_d))
    chash = meta.get("config_hash", config_hash(
        {"params": meta["params"], "config": meta["config"]}))
    import io
    buf = io.StringIO()
    buf.write(f"# config_hash={chash}\n")
    buf.write("t_s,x\n")
    np.savetxt(buf, np.column_stack([path.t_s, path.x]), fmt="%.12g", delimiter=",")
    new_digest = hashlib.sha256(buf.getvalue().encode()).hexdigest()
    with open(csv_path, "rb") as fh:
        old_digest = hashlib.sha256(fh.read()).hexdigest()
    if new_digest != old_digest:
        raise NumericalError(f"checksum mismatch: {old_digest} != {new_digest}")
    click.echo(f"verified: {csv_path} reproduces bit-for-bit ({old_digest[:16]})")


def main():
    cli()


if __name__ == "__main__":
    main()
