import math

import pytest

import shotcorr as sc

OMEGA_L = 2 * math.pi * 0.1
OMEGA_E = 2 * math.pi * 1e4
COUPLING = 0.44 * sc.BOHR_MAGNETON_OVER_HBAR


def overhauser(rms=2e-3, gamma=1.0):
    return sc.OverhauserModel(s0=sc.overhauser_s0_for_rms(rms, OMEGA_L), omega_l=OMEGA_L, omega_e=OMEGA_E,
                              gamma=gamma, coupling_c=COUPLING)


def test_white_noise_closed_form():
    s = sc.WhiteModel(level=1e6, omega_high=1e12)
    v = sc.autocorrelation(s, 1e-6, 1e-3)
    assert v.chi_minus == pytest.approx(2.0, rel=1e-2)
    assert v.chi_plus == pytest.approx(2.0, rel=1e-2)
    assert v.value == pytest.approx(math.exp(-1.0), rel=1e-2)


def test_echo_identity_and_zero_delay():
    s = sc.Spectrum(overhauser())
    tau = 5e-8
    assert sc.chi_minus(s, tau, 0.0) == 0.0
    # chi_+ at delta_t = 0 is 4 <dPhi^2>.
    assert sc.chi_plus(s, tau, 0.0) == pytest.approx(4 * sc.phase_variance(s, tau), rel=1e-6)


def test_t2_star_matches_rms():
    s = sc.Spectrum(overhauser())
    assert sc.t2_star(s) == pytest.approx(1 / (COUPLING * 2e-3), rel=1e-2)


def test_rms_round_trip():
    m = overhauser()
    m.omega_e = float("inf")
    field_variance = sc.variance(m) / COUPLING**2
    assert math.sqrt(field_variance) == pytest.approx(2e-3, rel=1e-6)


def test_regime_tags():
    m = overhauser()
    assert sc.chi_minus_approx(m, 5e-8, 1e-7)[1] == "quadratic"
    assert sc.chi_minus_approx(m, 5e-8, 1e-3)[1] == "linear"
    assert sc.chi_minus_approx(m, 5e-8, 100.0)[1] == "plateau"


def test_schedules():
    m = overhauser(rms=7e-3)
    tau = sc.tau_constant_contrast(m, 1e-4)
    linear = COUPLING**2 * OMEGA_L**2 * m.s0 * tau**2 * 1e-4
    assert linear == pytest.approx(2.0, rel=1e-10)
    c = sc.oneoverf_c_level(1e8, 2.0)
    t = sc.tau_oneoverf(c, 1.0)
    assert t**2 * (math.log(1.0 / t) + 1.5) == pytest.approx(c, rel=1e-10)


def test_simulate_is_deterministic_and_sane():
    s = sc.Spectrum(overhauser(rms=2e-2))
    a = sc.simulate(s, 5e-8, 1e-5, n_cycles=10, n_records=200, max_lag=2, seed=4, n_modes=256)
    b = sc.simulate(s, 5e-8, 1e-5, n_cycles=10, n_records=200, max_lag=2, seed=4, n_modes=256, threads=2)
    assert [p.value for p in a] == [p.value for p in b]
    assert len(a) == 2 and a[0].n_pairs == 200 * 9
    expected = sc.autocorrelation(s, 5e-8, 1e-5).value
    assert abs(a[0].value - expected) < 5 * a[0].stderr


def test_readout_correction():
    assert sc.correct_fidelity(0.1, 0.25) == pytest.approx(0.4)


def test_errors_are_python_exceptions():
    with pytest.raises(sc.DomainError):
        sc.Spectrum(sc.OverhauserModel(s0=-1.0, omega_l=1.0, omega_e=10.0, gamma=1.0, coupling_c=1.0))
    with pytest.raises(ValueError):
        sc.chi_minus(sc.WhiteModel(1.0, 1e6), -1.0, 1.0)


def test_gamma_discrimination_on_analytic_data():
    truth = overhauser(rms=2e-2, gamma=2.0)
    s = sc.Spectrum(truth)
    points = []
    for i in range(12):
        dt = 1.5e-6 * (1.7e-4 / 1.5e-6) ** (i / 11)
        tau = sc.tau_constant_contrast(truth, dt)
        v = sc.autocorrelation(s, tau, dt).value
        points.append(sc.CorrelationPoint(dt, tau, v, 1e-3 * v))
    ref = overhauser(rms=2e-2, gamma=1.0)
    r = sc.discriminate_gamma(points, ref)
    assert r["gamma_hat"] == 2
    assert not r["indeterminate"]
