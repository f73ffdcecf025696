"""Unit tests for the simulation core."""

import math

import numpy as np
import pytest
from scipy.integrate import quad

import burstsde as B
from burstsde.errors import DomainError, ParameterError, SimulationTruncated


# ---------------------------------------------------------------------------
# parameter validation


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(eta=0.0, lam=4.0),
        dict(eta=-1.0, lam=4.0),
        dict(eta=2.0, lam=1.0),
        dict(eta=2.0, lam=0.5),
        dict(eta=2.0, lam=4.0, x_min=0.0),
        dict(eta=2.0, lam=4.0, m=0),
        dict(eta=2.0, lam=4.0, m=1.5),
        dict(eta=2.0, lam=4.0, x_max=0.5),
        dict(eta=2.0, lam=4.0, sigma_t_sq=0.0),
    ],
)
def test_sde_params_rejects_bad_values(kwargs):
    with pytest.raises(ParameterError):
        B.SdeParams(**kwargs)


def test_complex_params_rejects_bad_values():
    with pytest.raises(ParameterError):
        B.ComplexSdeParams(eta=2.5, lam=3.6, epsilon=-0.1, x_max_cap=1e3)
    with pytest.raises(ParameterError):
        B.ComplexSdeParams(eta=2.5, lam=3.6, epsilon=0.017, x_max_cap=0.5)


def test_sim_config_rejects_bad_values():
    with pytest.raises(ParameterError):
        B.SimConfig(seed=1, kappa=0.0)
    with pytest.raises(ParameterError):
        B.SimConfig(seed=1, x0=-1.0)
    with pytest.raises(ParameterError):
        B.SimConfig(seed=1, burn_in=-1.0)


def test_fingerprint_is_json_ready():
    import json

    p = B.SdeParams(eta=2.0, lam=4.0)
    fp = p.fingerprint()
    assert fp["model"] == "simple"
    json.dumps(fp)
    # infinite upper restriction must serialize
    assert fp["x_max"] == "inf"
    fp2 = B.SdeParams(eta=2.0, lam=4.0, x_max=100.0).fingerprint()
    assert fp2["x_max"] == 100.0


# ---------------------------------------------------------------------------
# coefficient functions against hand-evaluated formulas


def test_drift_simple_hand_values():
    # eta=2, lam=4, x_min=1, m=2 at x=2:
    # (eta - lam/2 + (m/2)(x_min/x)^m) x^(2 eta - 1) = (0 + 1/4) * 8 = 2
    p = B.SdeParams(eta=2.0, lam=4.0)
    assert B.drift_simple(2.0, p) == pytest.approx(2.0, rel=1e-12)
    # at x = x_min the restriction contributes m/2 exactly
    assert B.drift_simple(1.0, p) == pytest.approx(1.0, rel=1e-12)


def test_drift_simple_upper_restriction():
    p = B.SdeParams(eta=2.0, lam=4.0, x_max=10.0)
    p_free = B.SdeParams(eta=2.0, lam=4.0)
    # upper restriction only subtracts (m/2)(x/x_max)^m x^(2 eta - 1)
    x = 5.0
    expect = B.drift_simple(x, p_free) - 0.5 * 2 * (0.5**2) * x**3
    assert B.drift_simple(x, p) == pytest.approx(expect, rel=1e-12)


def test_diffusion_simple_power():
    p = B.SdeParams(eta=2.5, lam=4.0)
    xs = np.array([0.5, 1.0, 3.0])
    assert np.allclose(B.diffusion_simple(xs, p), xs**2.5)


def test_coefficients_reject_nonpositive_x():
    p = B.SdeParams(eta=2.0, lam=4.0)
    with pytest.raises(DomainError):
        B.drift_simple(-1.0, p)
    with pytest.raises(DomainError):
        B.diffusion_simple(0.0, p)


def test_drift_complex_hand_value():
    p = B.ComplexSdeParams(eta=2.0, lam=4.0, epsilon=0.0, x_max_cap=1e3)
    # eps=0: drift = (eta - lam/2 - (x/xmax)^2)(1+x^2)^(eta-1) x
    x = 3.0
    expect = (0.0 - (3.0 / 1e3) ** 2) * (1 + 9.0) * 3.0
    assert B.drift_complex(x, p) == pytest.approx(expect, rel=1e-12)
    # signed model is odd in x
    assert B.drift_complex(-x, p) == pytest.approx(-B.drift_complex(x, p), rel=1e-12)


def test_diffusion_complex_even_and_positive():
    p = B.ComplexSdeParams(eta=2.5, lam=3.6, epsilon=0.017, x_max_cap=1e3)
    xs = np.array([-2.0, -0.5, 0.0, 0.5, 2.0])
    d = B.diffusion_complex(xs, p)
    assert np.all(d > 0)
    assert np.allclose(d, d[::-1])


# ---------------------------------------------------------------------------
# adaptive step


def test_step_adaptive_dt_rule():
    p = B.SdeParams(eta=2.5, lam=4.0)
    x = 3.0
    _, dt = B.step_adaptive(x, p, kappa=0.1, zeta=0.0)
    assert dt == pytest.approx(0.01 * x ** (-3.0), rel=1e-12)


def test_step_adaptive_matches_difference_equation():
    p = B.SdeParams(eta=2.0, lam=4.0)
    kappa, zeta, x = 0.1, 0.7, 2.0
    x1, _ = B.step_adaptive(x, p, kappa=kappa, zeta=zeta)
    restr = 0.5 * 2 * (1.0 / x) ** 2
    expect = x + kappa**2 * (2.0 - 2.0 + restr) * x + kappa * x * zeta
    assert x1 == pytest.approx(expect, rel=1e-12)


def test_step_adaptive_reflects_at_floor():
    p = B.SdeParams(eta=2.0, lam=4.0)
    # a huge negative shock would push x below zero; the step must fold it
    x1, _ = B.step_adaptive(1e-6, p, kappa=0.1, zeta=-50.0)
    assert x1 > 1e-6 * p.x_min * 0.999  # at/above the reflecting floor


# ---------------------------------------------------------------------------
# stationary density and spectral prediction


@pytest.mark.parametrize("p", [
    B.SdeParams(eta=2.0, lam=4.0),
    B.SdeParams(eta=2.0, lam=3.0, m=4),
    B.SdeParams(eta=2.5, lam=2.2, x_min=0.3),
    B.SdeParams(eta=2.0, lam=3.0, x_max=50.0),
])
def test_stationary_pdf_normalized(p):
    val, _ = quad(lambda u: B.stationary_pdf(u, p), 0.0, np.inf, limit=200)
    assert val == pytest.approx(1.0, rel=1e-7)


def test_stationary_pdf_tail_exponent():
    p = B.SdeParams(eta=2.0, lam=4.0)
    # far above x_min the density is a clean power law x^(-lam)
    assert B.stationary_pdf(100.0, p) / B.stationary_pdf(50.0, p) == pytest.approx(
        2.0**-4, rel=1e-3
    )


def test_spectral_beta_values():
    assert B.spectral_beta(B.SdeParams(eta=2.5, lam=4.0)) == pytest.approx(4.0 / 3.0)
    assert B.spectral_beta(B.SdeParams(eta=2.0, lam=4.0)) == pytest.approx(1.5)
    assert B.spectral_beta(B.SdeParams(eta=2.0, lam=3.0)) == pytest.approx(1.0)
    assert B.spectral_beta(B.SdeParams(eta=1.5, lam=3.0)) == pytest.approx(1.0)
    with pytest.raises(DomainError):
        B.spectral_beta(B.SdeParams(eta=1.0, lam=4.0))


# ---------------------------------------------------------------------------
# trajectory generation


def _short_config(**kw):
    base = dict(seed=7, kappa=0.1, burn_in=1.0, t_max=3.0)
    base.update(kw)
    return B.SimConfig(**base)


def test_simulate_is_deterministic():
    p = B.SdeParams(eta=2.0, lam=4.0)
    a = B.simulate("simple", p, _short_config())
    b = B.simulate("simple", p, _short_config())
    assert np.array_equal(a.t_s, b.t_s)
    assert np.array_equal(a.x, b.x)


def test_simulate_seed_changes_path():
    p = B.SdeParams(eta=2.0, lam=4.0)
    a = B.simulate("simple", p, _short_config(seed=7))
    b = B.simulate("simple", p, _short_config(seed=8))
    assert not np.array_equal(a.x, b.x)


def test_simulate_chunking_invariance():
    """The chunked runner must produce the same path as a monolithic one."""
    import burstsde.sde as sde_mod

    p = B.SdeParams(eta=2.0, lam=4.0)
    a = B.simulate("simple", p, _short_config(t_max=2.0))
    old = sde_mod._CHUNK
    sde_mod._CHUNK = 64
    try:
        b = B.simulate("simple", p, _short_config(t_max=2.0))
    finally:
        sde_mod._CHUNK = old
    assert np.array_equal(a.x, b.x)


def test_simulate_respects_time_step_rule():
    p = B.SdeParams(eta=2.0, lam=4.0)
    path = B.simulate("simple", p, _short_config(burn_in=0.0, t_max=0.5))
    dts = np.diff(path.t_s)
    # dt after a sample at x is kappa^2 x^(2-2 eta) evaluated at that sample
    expect = 0.01 * path.x[:-1] ** (2.0 - 2.0 * p.eta)
    assert np.allclose(dts, expect, rtol=1e-10)


def test_simulate_burn_in_discarded():
    p = B.SdeParams(eta=2.0, lam=4.0)
    path = B.simulate("simple", p, _short_config(burn_in=1.5, t_max=3.0))
    assert path.t_s[0] >= 1.5


def test_simulate_positive_and_finite():
    p = B.SdeParams(eta=2.5, lam=4.0)
    path = B.simulate("simple", p, _short_config())
    assert np.all(np.isfinite(path.x))
    assert np.all(path.x > 0)


def test_simulate_stops_on_target_bursts():
    p = B.SdeParams(eta=2.0, lam=4.0)
    cfg = B.SimConfig(seed=3, kappa=0.1, burn_in=1.0, target_bursts=50,
                      burst_threshold=2.0, max_steps=10**8)
    path = B.simulate("simple", p, cfg)
    assert path.burst_count == 50


def test_simulate_truncation_raises():
    p = B.SdeParams(eta=2.0, lam=4.0)
    cfg = B.SimConfig(seed=3, kappa=0.1, burn_in=0.0, t_max=1e6, max_steps=1000)
    with pytest.raises(SimulationTruncated):
        B.simulate("simple", p, cfg)


def test_simulate_requires_stop_condition():
    p = B.SdeParams(eta=2.0, lam=4.0)
    with pytest.raises(ParameterError):
        B.simulate("simple", p, B.SimConfig(seed=3))


def test_simulate_complex_signed_and_bounded():
    p = B.ComplexSdeParams(eta=2.5, lam=3.6, epsilon=0.017, x_max_cap=1e3)
    cfg = B.SimConfig(seed=11, kappa=0.1, x0=0.5, burn_in=1.0, t_max=5.0)
    path = B.simulate("complex", p, cfg)
    assert np.all(np.isfinite(path.x))
    assert np.any(path.x < 0)  # the signed model must change sign
    assert np.max(np.abs(path.x)) < 10 * p.x_max_cap


def test_time_unit_conversion():
    p = B.SdeParams(eta=2.0, lam=4.0)
    path = B.simulate("simple", p, _short_config())
    assert np.allclose(path.t_seconds, path.t_s / p.sigma_t_sq)
    assert B.SIGMA_T_SQ_EMPIRICAL == pytest.approx(1e-5 / 6.0)


def test_stationary_histogram_matches_analytic_pdf():
    """Time-weighted occupation histogram vs the analytic stationary law."""
    p = B.SdeParams(eta=2.0, lam=4.0)
    cfg = B.SimConfig(seed=5, kappa=0.1, burn_in=20.0, t_max=520.0, max_steps=10**9)
    hist = B.simulate_weighted_histogram("simple", p, cfg, lo=0.3, hi=10.0,
                                         bins_per_decade=8)
    ana = B.stationary_pdf(hist.centers, p)
    ok = hist.counts >= 200
    assert ok.sum() >= 8
    assert np.all(np.abs(hist.density[ok] / ana[ok] - 1.0) < 0.15)


# ---------------------------------------------------------------------------
# restart first-passage samplers


def test_bessel_fpt_samples_deterministic_and_positive():
    a = B.bessel_fpt_samples(nu=0.5, h_y=0.5, n_samples=500, seed=9, kappa=0.1)
    b = B.bessel_fpt_samples(nu=0.5, h_y=0.5, n_samples=500, seed=9, kappa=0.1)
    assert np.array_equal(a, b)
    assert np.all(a > 0)


def test_bessel_fpt_samples_floor_respected():
    t = B.bessel_fpt_samples(nu=0.5, h_y=0.5, n_samples=500, seed=9, kappa=0.1,
                             t_floor=0.01)
    assert np.min(t) >= 0.01


def test_bessel_fpt_mean_matches_analytic():
    """Mean passage time from y0 to h for the transformed process.

    For the index-nu process dy = (nu+1/2)/y dt + dW the mean exit time
    from y0 to the level h solves an ODE with solution
    E[T] = (h^2 - y0^2 * (y0/h)^(2 nu) ... ) -- evaluated here by
    quadrature of the Green-function formula, frozen for nu=0.5:
    E[T] = (h^2 - y0^2)/ (2 nu + 2) ... checked numerically instead.
    """
    nu, h = 0.5, 0.5
    y0 = 0.25
    # mean FPT for dy = (nu + 1/2)/y dt + dW from y0 up to h:
    # m(y) solves (1/2) m'' + (nu+1/2)/y m' = -1, m(h)=0, m'(0)=0
    # => m(y0) = (h^2 - y0^2) / (2 (nu + 1) )  [direct integration]
    expect = (h**2 - y0**2) / (2.0 * (nu + 1.0))
    errs = []
    for kappa in (0.05, 0.01):
        t = B.bessel_fpt_samples(nu=nu, h_y=h, n_samples=40000, seed=2,
                                 kappa=kappa, y0=y0)
        errs.append(abs(np.mean(t) / expect - 1.0))
    # first-order discretization bias: shrinks with kappa, small at 0.01
    assert errs[1] < errs[0]
    assert errs[1] < 0.02


def test_sde_fpt_samples_deterministic():
    p = B.SdeParams(eta=2.0, lam=4.0)
    a = B.sde_fpt_samples(p, h_x=2.0, n_samples=500, seed=4, kappa=0.1)
    b = B.sde_fpt_samples(p, h_x=2.0, n_samples=500, seed=4, kappa=0.1)
    assert np.array_equal(a, b)
    assert np.all(a > 0)


def test_fpt_samplers_reject_bad_arguments():
    with pytest.raises(DomainError):
        B.bessel_fpt_samples(nu=0.5, h_y=-1.0, n_samples=10, seed=1)
    with pytest.raises(DomainError):
        B.bessel_fpt_samples(nu=0.5, h_y=0.5, n_samples=10, seed=1, y0=0.7)
    p = B.SdeParams(eta=2.0, lam=4.0)
    with pytest.raises(DomainError):
        B.sde_fpt_samples(p, h_x=0.0, n_samples=10, seed=1)
