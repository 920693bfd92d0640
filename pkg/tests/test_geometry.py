import numpy as np
import pytest

import driftlab as dl
from driftlab.errors import (ConstructionFailure, DomainError, InvalidArgument,
                             OutOfWindow, UndefinedRatio)
from driftlab.geometry import bryant_tail_profile


def test_plateau_values(profile):
    assert profile.phi(0.25) == 0.25
    assert profile.phi(8.0) == 4.0
    assert profile.fp(8.0) == -1.0
    assert profile.fp(0.25) == 0.0
    p4 = dl.model_profile(4, 4.0, 0.5, 2.0)
    assert p4.phi(100.0) == pytest.approx(20.0, abs=0)


def test_blend_is_c2(profile):
    eps = 1e-6
    for fn, order in [(profile.phi, 2), (profile.dphi, 1), (profile.d2phi, 0),
                      (profile.fp, 2), (profile.fpp, 1), (profile.fppp, 0)]:
        for r0 in (profile.r_cone, profile.r_asym):
            jump = abs(fn(r0 + eps) - fn(r0 - eps))
            # continuity up to the finite-difference scale of each order
            assert jump < 5e-5


def test_construction_rejects_bad_parameters():
    with pytest.raises(InvalidArgument):
        dl.model_profile(2, 2.0, 0.5, 2.0)
    with pytest.raises(InvalidArgument):
        dl.model_profile(3, 2.0, 2.0, 0.5)
    with pytest.raises(InvalidArgument):
        dl.model_profile(3, -1.0, 0.5, 2.0)


def test_phi_domain_error(profile):
    with pytest.raises(DomainError):
        profile.phi(-1.0)


def test_drift_coefficient_closed_forms(profile):
    c0 = dl.drift_coefficients(profile, 0.0)
    # paraboloidal plateau, n = 3: A1 = 1/r + 1
    assert c0.A1(8.0) == pytest.approx(1.0 / 8.0 + 1.0, rel=1e-14)
    c1 = dl.drift_coefficients(profile, 1.0)
    # zeroth order couples the reference eigenvalue: -scale*lam/phi^2 = -lam/r
    assert c1.A0(8.0) == pytest.approx(-1.0 / 8.0, rel=1e-14)
    # cone plateau: A1 = (n-1)/r and A0 = 0 at lam = 0
    assert c0.A1(0.25) == pytest.approx(2.0 / 0.25, rel=1e-14)
    assert c0.A0(0.25) == 0.0
    with pytest.raises(InvalidArgument):
        dl.drift_coefficients(profile, -1.0)
    with pytest.raises(DomainError):
        c0.A1(0.0)


def test_q_identity_on_plateaus_and_blend(profile):
    # q = A1^2/4 + A1'/2 - A0 must hold where computed from closed forms
    for lam in (0.0, 1.0, 3.0):
        c = dl.drift_coefficients(profile, lam)
        for r, tol in [(0.3, 1e-12), (10.0, 1e-12), (1.0, 1e-8), (1.7, 1e-8)]:
            h = 1e-6 * r
            a1p_fd = (c.A1(r + h) - c.A1(r - h)) / (2 * h)
            q_fd = 0.25 * c.A1(r) ** 2 + 0.5 * a1p_fd - c.A0(r)
            assert abs(c.q(r) - q_fd) < max(tol, 1e-9)


def test_mean_curvature(profile):
    assert dl.mean_curvature(profile, 8.0) == pytest.approx(2.0 / 16.0, rel=1e-14)
    assert dl.mean_curvature(profile, 0.25) == pytest.approx(2.0 / 0.25, rel=1e-14)
    # on the plateau the deviation from (n-1)/(2 rho) vanishes identically
    rho = np.geomspace(2.0, 1e4, 33)
    dev = dl.mean_curvature(profile, rho) - (profile.n - 1) / (2 * rho)
    assert np.max(np.abs(dev)) == 0.0


def test_eta_coefficient(profile):
    assert dl.eta_coefficient(profile, 8.0) == 0.0
    assert dl.eta_coefficient(profile, 1e5) == 0.0
    assert dl.eta_coefficient(profile, 0.25) == pytest.approx(1.0, rel=1e-14)
    blend = dl.eta_coefficient(profile, np.linspace(0.6, 1.9, 64))
    assert np.all(np.isfinite(blend))


def test_certificate_exact_on_model_profile(profile):
    report = dl.ap_certificate(profile)
    assert report.passed
    for line in report.lines:
        assert line.fit.exact
        assert line.exponent_repr == "exact"
    csv = report.to_csv()
    assert csv.splitlines()[0] == "quantity,fitted_exponent,required_exponent,r2,pass"


def test_certificate_fits_bryant_like_tail():
    p = bryant_tail_profile(3, 2.0, 0.5, 2.0, c=0.7, p=1.0)
    report = dl.ap_certificate(p)
    line = {l.quantity: l for l in report.lines}["fprime_plus_one"]
    assert not line.fit.exact
    assert abs(line.fit.tau - 1.0) < 0.05
    assert line.passed
    assert report.passed     # decay rates 1, 2, 3 all clear their bars


def test_certificate_fails_broken_second_derivative():
    # f'' ~ 1/r decays too slowly: the fitted exponent ~ 1 < 3/2 must fail
    p = broken_fpp_profile(3, 2.0, 0.5, 2.0, c=0.5)
    report = dl.ap_certificate(p)
    line = {l.quantity: l for l in report.lines}["fsecond"]
    assert abs(line.fit.tau - 1.0) < 0.05
    assert not line.passed
    assert not report.passed
    assert "fsecond" in report.failing_lines()


def test_certificate_needs_enough_points(profile):
    with pytest.raises(InvalidArgument):
        dl.ap_certificate(profile, points=3)


def test_certificate_monotone_under_tail_tightening():
    # tightening the potential tail never flips unrelated lines
    loose = dl.ap_certificate(bryant_tail_profile(3, 2.0, 0.5, 2.0, c=0.7, p=1.0))
    tight = dl.ap_certificate(bryant_tail_profile(3, 2.0, 0.5, 2.0, c=0.7, p=2.0))
    for a, b in zip(loose.lines, tight.lines):
        if a.passed:
            assert b.passed


def test_flow_map_basic(profile):
    assert dl.flow_map(profile, 10.0, 0.0) == 10.0
    # full-plateau trajectory: f' = -1 integrates to r - t exactly
    assert dl.flow_map(profile, 100.0, 50.0) == pytest.approx(50.0, abs=1e-8)
    assert dl.flow_map(profile, 1000.0, 900.0) == pytest.approx(100.0, abs=1e-7)


def test_flow_map_bounds_sweep(profile):
    worst = 0.0
    for r in np.geomspace(10, 1000, 7):
        for frac in np.linspace(0.1, 0.9, 5):
            worst = max(worst, abs(dl.flow_map(profile, r, frac * r) - (r - frac * r)))
    assert worst <= 5.0


def test_flow_map_window_errors(profile):
    with pytest.raises(OutOfWindow):
        dl.flow_map(profile, 10.0, 9.5)
    with pytest.raises(OutOfWindow):
        dl.flow_map(profile, 10.0, -1.0)


def test_flow_derivative_identity(profile):
    # plateau: ratio is exactly 1 and the finite difference sits at solver noise
    assert dl.flow_derivative_check(profile, 100.0, 20.0) < 1e-8
    # t = 0: trivial
    assert dl.flow_derivative_check(profile, 50.0, 0.0) < 1e-12
    # trajectory ending in the blend region
    assert dl.flow_derivative_check(profile, 10.0, 8.5) < 1e-6


def test_flow_derivative_undefined_on_cone(profile):
    with pytest.raises(UndefinedRatio):
        dl.flow_derivative_check(profile, 0.3, 0.1)


def test_profile_params_roundtrip(profile):
    params = profile.params()
    rebuilt = dl.model_profile(**{k: params[k] for k in
                                  ("n", "scale", "r_cone", "r_asym", "mu")})
    assert rebuilt.phi(3.3) == profile.phi(3.3)
