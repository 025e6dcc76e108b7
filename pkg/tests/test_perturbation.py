import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bandshift import (
    AngularCoefficients,
    DecayPotential,
    Theta,
    build_reference,
    choose_M,
    eval_W,
    verify_structure,
)
from bandshift.errors import HTooLargeError, ValidationError
from bandshift.perturbation import smoothstep


def test_eval_pure_power(decay_w0):
    assert eval_W(decay_w0, np.array([2.0])) == pytest.approx(0.125, abs=1e-14)


def test_eval_two_orders(decay_w0_w1):
    assert eval_W(decay_w0_w1, np.array([10.0])) == pytest.approx(1.05e-3, rel=1e-12)


def test_eval_core_positive(decay_w0):
    val = eval_W(decay_w0, np.array([0.0]))
    assert val > 0.0
    assert val == pytest.approx(1.0)  # constant core at the w0 average


def test_eval_exact_outside_one(decay_w0_w1):
    # the built-in family carries no remainder beyond the angular sum
    for r in (1.0, 1.5, 3.7, 20.0):
        exact = r**-3 + 0.5 * r**-4
        assert eval_W(decay_w0_w1, np.array([r])) == pytest.approx(exact, rel=1e-14)
        assert eval_W(decay_w0_w1, np.array([-r])) == pytest.approx(exact, rel=1e-14)


def test_asymmetric_pairs():
    ang = AngularCoefficients.from_pairs([(2.0, 1.0)])
    pot = DecayPotential(3.0, ang)
    assert eval_W(pot, np.array([-2.0])) == pytest.approx(2.0 / 8.0)
    assert eval_W(pot, np.array([2.0])) == pytest.approx(1.0 / 8.0)


def test_w0_positivity_enforced():
    with pytest.raises(ValidationError):
        AngularCoefficients.from_constants(1, [-1.0])


def test_delta_must_exceed_dimension():
    with pytest.raises(ValidationError):
        DecayPotential(0.5, AngularCoefficients.from_constants(1, [1.0]))


@given(st.floats(0.05, 40.0), st.booleans())
@settings(max_examples=60, deadline=None)
def test_eval_positive_everywhere(r, neg):
    pot = DecayPotential(3.0, AngularCoefficients.from_constants(1, [1.0, 0.5]))
    x = np.array([-r if neg else r])
    assert eval_W(pot, x) > 0.0


def test_choose_m_examples(decay_w0):
    assert choose_M((0.0, 1.0), decay_w0, 2.0) == pytest.approx(13.0)
    assert choose_M((-1.0, 1.0), decay_w0, 0.0) == pytest.approx(9.0)


def test_choose_m_monotone(decay_w0):
    small = choose_M((0.1, 0.6), decay_w0, 1.0)
    large = choose_M((0.1, 1.6), decay_w0, 1.0)
    assert large >= small


@given(st.floats(1.0, 30.0), st.floats(-3.0, 3.0))
@settings(max_examples=80, deadline=None)
def test_theta_properties(M, toverm):
    theta = Theta(M)
    t = toverm * M
    val = theta(t)
    assert val >= M / 3.0 - 1e-12
    if t >= M / 2.0:
        assert val == t
        assert theta.residual(t) == 0.0


def test_theta_monotone():
    theta = Theta(9.0)
    t = np.linspace(-5.0, 20.0, 800)
    assert np.all(np.diff(theta(t)) >= -1e-12)


def test_smoothstep_bounds():
    s = np.linspace(-1.0, 2.0, 500)
    v = smoothstep(s)
    assert np.all((v >= 0.0) & (v <= 1.0))
    assert np.all(np.diff(v) >= -1e-15)
    assert smoothstep(-0.1) == 0.0 and smoothstep(1.0) == 1.0


def _reference(decay, M=9.0, h=0.02, **kw):
    return build_reference(decay, M, h, **kw)


def test_reference_default_radii(decay_w0):
    ref = _reference(decay_w0)
    assert 0.0 < ref.r1 < 1.0 < ref.r2  # (min w0)^{1/delta} = 1


def test_reference_rejects_bad_radii(decay_w0):
    with pytest.raises(ValidationError):
        _reference(decay_w0, r1=1.5)
    with pytest.raises(ValidationError):
        _reference(decay_w0, r2=0.5)


def test_reference_h_too_large(decay_w0):
    with pytest.raises(HTooLargeError):
        _reference(decay_w0, M=9.0, h=5.0)


def test_phi_outside_chi_support(decay_w0):
    ref = _reference(decay_w0)
    xs = np.linspace(ref.chi_support_radius * 1.01, 3.0, 40)[:, None]
    direct = ref.h ** -3.0 * np.array([eval_W(decay_w0, x / ref.h) for x in xs])
    np.testing.assert_allclose(np.atleast_1d(ref.phi(xs)), direct, rtol=1e-13)


def test_phi0_examples(decay_w0):
    ref = _reference(decay_w0)
    # on the plateau: exactly M; far out: exactly the decay power
    assert ref.phi0(np.array([0.0])) == ref.M
    assert ref.phi0(np.array([10.0])) == pytest.approx(1e-3, rel=1e-12)
    # phi0 = 0.01 at w0 = 1, delta = 2, |x| = 10, chi = 0
    pot2 = DecayPotential(2.1, AngularCoefficients.from_constants(1, [1.0]))
    ref2 = build_reference(pot2, 9.0, 0.02)
    assert ref2.phi0(np.array([10.0])) == pytest.approx(10.0**-2.1, rel=1e-12)


def test_wtilde_support(decay_w0):
    ref = _reference(decay_w0)
    r_supp = ref.chi_support_radius / ref.h
    xs = np.concatenate([np.linspace(0.01, r_supp * 0.999, 50),
                         np.linspace(r_supp * 1.001, 3 * r_supp, 50)])
    vals = np.atleast_1d(ref.w_tilde(xs[:, None]))
    assert np.all(vals[50:] == 0.0)
    # inside: h^{-delta} W - M where chi = 1
    inner = xs < 0.45 * r_supp
    expected = ref.h**-3.0 * np.array([eval_W(decay_w0, np.array([x])) for x in xs[inner]]) - ref.M
    np.testing.assert_allclose(vals[: inner.sum()], expected, rtol=1e-12)


def test_phi_above_half_m_on_half_shell(decay_w0):
    # phi(h x, h) > M/2 wherever h^{-delta} W(x) > M/2
    ref = _reference(decay_w0)
    xs = np.linspace(0.01, 3.0 / ref.h, 400)[:, None]
    w_scaled = ref.h**-3.0 * np.array([eval_W(decay_w0, x) for x in xs])
    phi_vals = np.atleast_1d(ref.phi(ref.h * xs))
    on_shell = w_scaled > ref.M / 2.0
    assert np.all(phi_vals[on_shell] > ref.M / 2.0)


def test_phi_derivatives_uniformly_bounded(decay_w0):
    # sup_x |phi| and |FD d phi/dx| admit one h-independent constant: the
    # per-h sups must not grow as h is halved
    ref0 = _reference(decay_w0, h=0.02)
    xs = np.linspace(-4.0, 4.0, 3001)[:, None]
    bounds = []
    for h in (0.02, 0.01, 0.005):
        vals = np.atleast_1d(ref0.phi(xs, h))
        step = 1e-6
        dvals = (np.atleast_1d(ref0.phi(xs + step, h)) - np.atleast_1d(ref0.phi(xs - step, h))) / (
            2 * step
        )
        bounds.append(max(np.abs(vals).max(), np.abs(dvals).max()))
    assert np.isfinite(bounds).all()
    assert max(bounds) <= 1.5 * min(bounds)


def test_expansion_consistency_slope():
    # truncating the expansion after phi_0 leaves an O(h) defect: the observed
    # log-error vs log-h slope must approach 1 (the next power present)
    pot = DecayPotential(3.0, AngularCoefficients.from_constants(1, [1.0, 0.5]))
    ref = build_reference(pot, 9.0, 0.02)
    xs = np.linspace(0.5, 4.0, 200)[:, None]
    hs = np.array([0.02, 0.01, 0.005, 0.0025])
    errs = []
    for h in hs:
        full = np.atleast_1d(ref.phi(xs, h))
        trunc = np.atleast_1d(ref.phi_expansion(xs, h, orders=0))
        errs.append(np.abs(full - trunc).max())
    slope = np.polyfit(np.log(hs), np.log(errs), 1)[0]
    assert slope == pytest.approx(1.0, abs=0.05)
    # including phi_1 leaves nothing for this family (zero remainder)
    exact = np.abs(np.atleast_1d(ref.phi(xs, 0.005)) - ref.phi_expansion(xs, 0.005, orders=1)).max()
    assert exact < 1e-12


def test_verify_structure_report(decay_w0):
    ref = _reference(decay_w0)
    report = verify_structure(ref)
    assert report.euler_max_residual <= 1e-8
    assert report.phi0_decay_max_mismatch <= 1e-12
    assert report.phi0_min_on_chi_support_minus_M > 0.0
    assert report.phi0_plateau_max_deviation == 0.0
    assert report.phi_outside_max_mismatch <= 1e-10
    assert report.wtilde_outside_max == 0.0


def test_verify_structure_asymmetric():
    pot = DecayPotential(3.5, AngularCoefficients.from_pairs([(1.3, 0.8)]))
    ref = build_reference(pot, 7.0, 0.01)
    report = verify_structure(ref)
    assert report.euler_max_residual <= 1e-8
    assert report.phi0_decay_max_mismatch <= 1e-12
    assert report.phi0_min_on_chi_support_minus_M > 0.0
