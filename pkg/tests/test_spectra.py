import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from omneg.ratfact import inverse_ft_rational, spectral_factorize
from omneg.spectra import (
    HBAR,
    TWO_PI,
    NoiseModel,
    OscillatorParams,
    RationalSpectrum,
    SpectrumError,
    WhiteNoiseParams,
    chi_EN,
    chi_F,
    chi_F_rational,
    chi_S,
    fdt_respecting_spectrum,
    fdt_white_limit,
    lorentzian,
    mech_susceptibility,
    random_spectrum,
    to_dimensionless,
    to_physical,
    white,
    white_noise_model,
    zero_spectrum,
)


@pytest.fixture
def osc():
    return OscillatorParams(1.0, 0.1, 1.0)


def test_susceptibility_values(osc):
    assert mech_susceptibility(osc, 0.0) == pytest.approx(1.0)
    assert mech_susceptibility(osc, 1.0) == pytest.approx(10j)
    assert abs(mech_susceptibility(osc, 100.0)) == pytest.approx(1e-4, rel=1e-3)


def test_susceptibility_conjugate_symmetry(osc):
    w = np.random.default_rng(0).normal(scale=5, size=100)
    np.testing.assert_allclose(mech_susceptibility(osc, -w), np.conj(mech_susceptibility(osc, w)))


def test_undamped_resonance_is_an_error():
    with pytest.raises(SpectrumError, match="undamped"):
        mech_susceptibility(OscillatorParams(1.0, 0.0, 1.0), 1.0)


@pytest.mark.parametrize("kw", [dict(omega_m=0), dict(gamma_m=-1), dict(omega_q=-1), dict(eta=0), dict(eta=1.1)])
def test_oscillator_invariants(kw):
    base = dict(omega_m=1.0, gamma_m=0.1, omega_q=1.0, eta=1.0)
    base.update(kw)
    with pytest.raises(SpectrumError):
        OscillatorParams(**base)


def test_white_noise_model_levels():
    p = OscillatorParams.from_hz(1.0, 0.01, 10.0)
    m = white_noise_model(WhiteNoiseParams(TWO_PI * 10, TWO_PI * 10), p)
    w = np.linspace(-100, 100, 51)
    np.testing.assert_array_equal(m.force()(w), np.full_like(w, 2 * (TWO_PI * 10) ** 2 / TWO_PI))
    np.testing.assert_array_equal(m.sensing()(w), np.full_like(w, 2 * TWO_PI / (TWO_PI * 10) ** 2))
    assert m.force_scale == m.sensing_scale == 1.0


def test_white_noise_model_zero_force_and_infinite_sensing():
    p = OscillatorParams(1.0, 0.1, 1.0)
    assert white_noise_model(WhiteNoiseParams(0.0, 2.0), p).force().is_zero()
    with pytest.raises(SpectrumError, match="infinite sensing"):
        WhiteNoiseParams(1.0, 0.0)


def test_chi_functions(osc):
    m = white_noise_model(WhiteNoiseParams(2.0, 3.0), osc)
    assert chi_F(m, osc, 0.0) == pytest.approx(2 * 2.0**2 / osc.omega_m**4)
    assert chi_S(m, osc, 0.7) == pytest.approx(2 / 3.0**2)
    no_force = NoiseModel(zero_spectrum(), white(0.5))
    w = np.linspace(-3, 3, 7)
    np.testing.assert_allclose(chi_EN(no_force, osc, w), chi_S(no_force, osc, w))


def test_chi_F_at_zero_time_against_quadrature(osc):
    wf = 2.0
    m = white_noise_model(WhiteNoiseParams(wf, 3.0), osc)
    analytic = inverse_ft_rational(chi_F_rational(m, osc), np.array([0.0]))[0].real
    numeric = quad(lambda w: chi_F(m, osc, w), -np.inf, np.inf, limit=400)[0] / TWO_PI
    assert analytic == pytest.approx(wf**2 / (osc.gamma_m * osc.omega_m**2), rel=1e-10)
    assert numeric == pytest.approx(analytic, rel=1e-6)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_random_spectra_invariants(seed):
    rng = np.random.default_rng(seed)
    s = random_spectrum(rng)
    w = np.linspace(0.01, 50, 200)
    np.testing.assert_allclose(s(w), s(-w), rtol=1e-12)
    assert s.check_nonnegative()
    assert len(s.den) - 1 <= 8
    p = OscillatorParams(1.0, 0.2, 1.0)
    assert np.all(chi_EN(NoiseModel(s, s), p, np.linspace(-20, 20, 401)) >= 0)


def test_spectrum_validation():
    with pytest.raises(SpectrumError, match="not even"):
        RationalSpectrum((1.0, 1.0), (1.0, 0.0, 1.0))
    with pytest.raises(SpectrumError, match="real root"):
        RationalSpectrum((1.0,), (-1.0, 0.0, 1.0))
    with pytest.raises(SpectrumError, match="grows"):
        RationalSpectrum((1.0, 0.0, 1.0))


def test_config_round_trip():
    s = lorentzian(2.0, 0.5, 1.0)
    assert RationalSpectrum.from_config(s.to_config()) == s
    assert RationalSpectrum.from_config({"type": "white", "level": 3.0})(0.0) == 3.0


def test_fdt_white_limit(osc):
    assert fdt_white_limit(1.0, osc)(0.0) == pytest.approx(2 * osc.gamma_m)
    assert fdt_white_limit(10.0, osc)(5.0) == pytest.approx(20 * osc.gamma_m)
    with pytest.raises(SpectrumError, match="high-temperature"):
        fdt_white_limit(0.5, osc)


def test_fdt_respecting_spectrum_obeys_bound(osc):
    rng = np.random.default_rng(1)
    for _ in range(20):
        s = fdt_respecting_spectrum(rng, osc)
        w = np.linspace(-50, 50, 2001) * osc.omega_m
        assert np.all(osc.omega_m * s(w) >= 2 * osc.gamma_m * np.abs(w))
        assert len(s.den) - 1 <= 8
        spectral_factorize(s.to_rational())


def test_unit_conversion_round_trip(osc):
    mass = 1e-3
    fpsd, xpsd = white(4e-30), lorentzian(1e-34, 0.2)
    model = to_dimensionless(mass, fpsd, xpsd, osc)
    back_f, back_x = to_physical(mass, model, osc)
    w = np.linspace(-3, 3, 11)
    np.testing.assert_allclose(back_f(w), fpsd(w), rtol=1e-12)
    np.testing.assert_allclose(back_x(w), xpsd(w), rtol=1e-12)
    # hand-computed prefactor for the force channel
    assert model.force()(0.0) == pytest.approx(4e-30 * 2 / (HBAR * mass * osc.omega_m))
    assert to_dimensionless(mass, zero_spectrum(), zero_spectrum(), osc).force().is_zero()
    with pytest.raises(SpectrumError):
        to_dimensionless(0.0, fpsd, xpsd, osc)
