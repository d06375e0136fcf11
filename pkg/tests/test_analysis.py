import math

import numpy as np
import pytest

from gain_oracle import constants_from, oracle_values
from qrate import (PulseTrain, Zero, check_trajectory, derive_constants,
                   eta_functions, gain_constants, iss_gains, run_closed_loop)
from qrate.codec import quad_value


@pytest.fixture(scope="module")
def toy_gains(toy_derived, toy_params):
    g = gain_constants(toy_derived, toy_params)
    return g, iss_gains(toy_derived, toy_params, g)


def test_gain_constants_scalar_toy(toy_derived, toy_params):
    g = gain_constants(toy_derived, toy_params)
    # closed forms with P = 4/3, rho = 1, |S| = 0.5, growth_eff = 1.1
    assert abs(g.c1 - (math.sqrt(4.0 / 3.0) + 1.0)) < 1e-9
    assert abs(g.c2 - (1.0 / math.sqrt(4.0 / 3.0) + 1.0)) < 1e-9
    assert abs(g.c3 - (4.0 * 0.5 + 1.1) / 5.0) < 1e-9
    # escape constant: max{1/sqrt(rho*phi), c3/sqrt(phi) + 1} * dist_gain
    a = 10.0 * math.log(1.1)
    exact_phi = (math.exp(0.1 * a) - 1.0) / a
    assert abs(g.escape_gain - 10.0 * exact_phi) < 1e-9
    assert abs(g.step_gain - 2.1) < 1e-9
    assert g.valid and abs(g.nu - 0.685) < 1e-9
    assert abs(g.decay + 0.5 * math.log(0.685)) < 1e-9
    assert abs(g.kappa + math.log(0.685) / (2.0 * math.log(2.1))) < 1e-9
    assert abs(g.c_exp - g.c1 * g.c3 / math.sqrt(0.685)) < 1e-9


def test_gain_constants_invalid_nu(ref_plant, raw_params):
    d = derive_constants(ref_plant, raw_params)
    g = gain_constants(d, raw_params)
    assert not g.valid
    assert math.isnan(g.c_exp) and math.isnan(g.decay) and math.isnan(g.kappa)
    assert g.c1 > 0 and g.escape_gain > 0  # decay-free constants still live


def test_eta_counts(cert_derived, cert_params):
    eta_x, eta_d, eta_hat = eta_functions(cert_derived, cert_params.search_margin)
    assert eta_x(2.0) == math.ceil(math.log(2.0) / math.log(1.2)) == 4
    assert eta_x(0.5) == 0.0
    assert eta_x(1.0) == 0.0
    lam = math.exp(0.1)
    r = (1.2 * lam - 1.0) / (lam - 1.0)
    assert abs(cert_derived.search_ratio - r) < 1e-12
    assert eta_d(2.0) == math.ceil(math.log(2.0 * r) / math.log(1.2)) == 11


def test_eta_smooth_dominates(cert_derived, cert_params):
    eta_x, eta_d, eta_hat = eta_functions(cert_derived, cert_params.search_margin)
    for s in np.logspace(-3, 6, 200):
        assert eta_hat(s) >= max(eta_x(s), eta_d(s)) - 1e-12
    # nondecreasing on the sampled grid
    grid = np.logspace(-3, 6, 200)
    for f in (eta_x, eta_d, eta_hat):
        vals = [f(s) for s in grid]
        assert all(b >= a - 1e-12 for a, b in zip(vals, vals[1:]))


def test_iss_gains_vanish_at_zero(toy_gains):
    _, f = toy_gains
    assert f.gamma1(0.0) == 0.0
    assert f.gamma2(0.0) == 0.0
    assert f.gamma3(0.0) == 0.0


def test_iss_gains_monotone_and_dominate_feedthrough(toy_gains, toy_derived):
    _, f = toy_gains
    grid = np.logspace(-4, 3, 60)
    for gamma in (f.gamma1, f.gamma2, f.gamma3):
        vals = [gamma(s) for s in grid]
        assert all(v > 0 for v in vals)
        assert all(b > a for a, b in zip(vals, vals[1:]))
    for s in grid:
        assert f.gamma2(s) >= toy_derived.dist_gain * s
        assert f.gamma3(s) >= toy_derived.dist_gain * s


def test_stab_gain_two_regime_split(toy_gains, toy_params, toy_derived):
    # both the long-time and the short-time branch must win somewhere, and
    # their max must stay continuous across the crossover
    g, f = toy_gains
    c12 = g.c1 * g.c2
    h_factor = g.step_gain / (g.step_gain - 1.0)
    expo = g.kappa * (math.log(g.step_gain) / math.log(g.nu)) + 1.0
    e_small = 1e-6
    grid = np.logspace(-6, 2, 2000)
    long_t = c12 * grid ** (g.kappa / 2.0) * (grid + e_small)
    short_t = h_factor * grid**expo
    assert np.any(long_t > short_t) and np.any(short_t > long_t)
    vals = np.array([f.stab_state_gain(e_small, s) for s in grid])
    assert np.allclose(vals, np.maximum(long_t, short_t), rtol=1e-12)
    # sampled continuity on the fine grid (max of two continuous branches)
    rel_jump = np.abs(np.diff(vals)) / np.maximum(vals[1:], 1e-30)
    assert np.max(rel_jump) < 0.05


def test_iss_gains_require_certificate(ref_plant, raw_params):
    d = derive_constants(ref_plant, raw_params)
    g = gain_constants(d, raw_params)
    with pytest.raises(ValueError):
        iss_gains(d, raw_params, g)


def test_gain_composition_matches_oracle(toy_gains, toy_derived, toy_params):
    g, f = toy_gains
    consts = constants_from(toy_derived, toy_params, g)
    for s in np.logspace(-3, 3, 20):
        ref = oracle_values(consts, float(s))
        got = {
            "capture0": f.capture0_gain(s),
            "capture": f.capture_gain(s),
            "first_stage": f.first_stage_gain(toy_params.radius0, s),
            "post_escape": f.post_escape_gain(s),
            "post_recapture": f.post_recapture_gain(s),
            "gamma1": f.gamma1(s),
            "gamma2": f.gamma2(s),
            "gamma3": f.gamma3(s),
        }
        for name, val in got.items():
            scale = max(1.0, abs(ref[name]), abs(val))
            assert abs(val - ref[name]) <= 1e-12 * scale, name


def _reference_log(ref_plant, cert_params, cert_derived, horizon=30.0, substeps=25):
    sig = PulseTrain([(10.5, 10.7, [1.5]), (22.5, 22.7, [1.5])], dim=1)
    log = run_closed_loop(ref_plant, cert_params, cert_derived, sig,
                          np.array([1.0, 1.0]), horizon, substeps=substeps)
    return sig, log


def test_check_trajectory_reference_all_pass(ref_plant, cert_params, cert_derived):
    sig, log = _reference_log(ref_plant, cert_params, cert_derived)
    g = gain_constants(cert_derived, cert_params)
    rep = check_trajectory(log, cert_derived, cert_params, g, sig)
    assert rep.certified
    assert rep.all_pass
    names = {r.name for r in rep.rows}
    assert "lyapunov_decay" in names and "iss_envelope" in names
    assert rep.row("escape_state_bound").n_checked == 2
    assert rep.row("recapture_index").n_checked == 2
    assert rep.row("capture_initial_index").n_checked == 1


def test_check_trajectory_corruption_detected(ref_plant, cert_params, cert_derived):
    sig, log = _reference_log(ref_plant, cert_params, cert_derived, horizon=8.0)
    k = 40  # deep inside a stabilizing stage
    log.radius[k] *= 0.5
    log.value[k] = quad_value(log.center[k], log.radius[k], cert_derived.P,
                              cert_params.rho)
    g = gain_constants(cert_derived, cert_params)
    rep = check_trajectory(log, cert_derived, cert_params, g, sig)
    assert not rep.all_pass


def test_check_trajectory_uncertified_design(ref_plant, raw_params):
    d = derive_constants(ref_plant, raw_params)
    sig = Zero(dim=1)
    log = run_closed_loop(ref_plant, raw_params, d, sig, np.array([1.0, 1.0]),
                          10.0, substeps=10)
    g = gain_constants(d, raw_params)
    rep = check_trajectory(log, d, raw_params, g, sig)
    assert not rep.certified
    gated = [r for r in rep.rows if r.status == "not_certified"]
    assert {r.name for r in gated} == {
        "lyapunov_decay", "value_bound_c1", "state_bound_c2",
        "next_state_bound_c3", "exp_decay_envelope", "iss_envelope"}
    # the protocol-level inequalities still pass
    for r in rep.rows:
        if r.status != "not_certified":
            assert r.status == "pass", r.name


def test_check_trajectory_dimension_guard(ref_plant, cert_params, cert_derived,
                                          toy_derived, toy_params):
    sig, log = _reference_log(ref_plant, cert_params, cert_derived, horizon=2.0)
    g = gain_constants(toy_derived, toy_params)
    with pytest.raises(ValueError):
        check_trajectory(log, toy_derived, toy_params, g, sig)
