import warnings

import numpy as np
import pytest

from omneg.spectra import OscillatorParams, mech_susceptibility
from omneg.squeeze import (
    SqueezeError,
    SqueezeTransform,
    fd_squeeze_transform,
    filter_cavity_params,
    quantum_noise_spectrum,
    random_fd_squeezer,
    rtr_matrix,
    validate_symplectic,
)

W = np.concatenate([-np.logspace(-3, 3, 500), np.logspace(-3, 3, 500)])


def test_identity_and_constant_are_symplectic():
    assert validate_symplectic(SqueezeTransform.none())
    assert validate_symplectic(SqueezeTransform.constant(0.8))
    assert validate_symplectic(SqueezeTransform.rotation(0.3))


def test_rtr_parametrization_has_unit_determinant():
    rng = np.random.default_rng(0)
    r, th, rho = rng.uniform(0, 2, 1000), rng.uniform(0, 6, 1000), rng.uniform(0, 6, 1000)
    A, B, C, D = rtr_matrix(r, th, rho)
    np.testing.assert_allclose(A * D - B * C, 1.0, atol=1e-10)


def test_filter_cavity_params_limits():
    p = OscillatorParams(1.0, 0.01, 100.0)
    g, d = filter_cavity_params(p)
    assert g == pytest.approx(100 / np.sqrt(2), rel=1e-3)
    assert d == pytest.approx(100 / np.sqrt(2), rel=1e-3)
    g, _ = filter_cavity_params(OscillatorParams(2.0, 0.01, 2.0))
    assert g == pytest.approx(2.0 * np.sqrt((np.sqrt(2) - 1) / 2))
    with pytest.raises(SqueezeError, match="degenerate"):
        filter_cavity_params(OscillatorParams(1.0, 0.01, 0.0))


def test_filter_cavity_warns_for_low_q():
    with pytest.warns(UserWarning, match="high-Q"):
        filter_cavity_params(OscillatorParams(1.0, 0.5, 1.0))


def test_fd_transform_is_symplectic_and_causal():
    p = OscillatorParams(1.0, 0.01, 3.0)
    sq = fd_squeeze_transform(1.0, *filter_cavity_params(p))
    rep = validate_symplectic(sq, W)
    assert rep.ok, rep
    for row in sq.input_filter():
        for entry in row:
            assert np.all(entry.poles().imag < 0)


def test_all_pass_cavity():
    sq = fd_squeeze_transform(0.0, 0.7, 0.0)
    T1, T2, T12 = sq.T(W)
    np.testing.assert_allclose(T1, 1.0, atol=1e-12)
    np.testing.assert_allclose(T2, 1.0, atol=1e-12)
    np.testing.assert_allclose(np.abs(T12), 0.0, atol=1e-12)


def test_filter_cavity_cancels_amplitude_term():
    p = OscillatorParams(1.0, 1e-4, 2.0)
    sq = fd_squeeze_transform(0.0, *filter_cavity_params(p))
    w = np.linspace(0.05, 10, 400)
    H = sq.matrix(w)
    k = p.omega_q**2 * mech_susceptibility(p, w)
    # the u1 contribution to v2 must be proportional to exp(r) with no
    # back-action enhancement: |H21 + k H11|^2 + |H22 + k H12|^2 = 1 + |k|^2
    # before squeezing, and the filtered row is orthogonal to the squeezed axis
    row = H[:, 1, :] + k[:, None] * H[:, 0, :]
    np.testing.assert_allclose(np.sum(np.abs(row) ** 2, axis=1), 1 + np.abs(k) ** 2, rtol=1e-2)
    sq1 = fd_squeeze_transform(1.0, *filter_cavity_params(p))
    row1 = sq1.matrix(w)[:, 1, :] + k[:, None] * sq1.matrix(w)[:, 0, :]
    assert np.max(np.abs(row1[:, 0])) < 1e-2 * np.max(np.abs(row1[:, 1]))


def test_quantum_noise_spectra():
    p = OscillatorParams(1.0, 1e-3, 2.0)
    w = np.linspace(-8, 8, 401)
    base = 1 + p.omega_q**4 * np.abs(mech_susceptibility(p, w)) ** 2
    np.testing.assert_allclose(quantum_noise_spectrum(p)(w), base, rtol=1e-12)
    sq = fd_squeeze_transform(1.0, *filter_cavity_params(p))
    np.testing.assert_allclose(quantum_noise_spectrum(p, sq)(w), np.exp(-2) * base, rtol=1e-2)
    np.testing.assert_allclose(quantum_noise_spectrum(p.with_(omega_q=0.0))(w), 1.0)


def test_random_squeezers_are_valid():
    rng = np.random.default_rng(4)
    p = OscillatorParams(1.0, 0.05, 2.0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for _ in range(10):
            sq = random_fd_squeezer(rng, p)
            assert sq.is_frequency_dependent()
            assert validate_symplectic(sq, W)


def test_general_transform_degree_limit():
    from omneg.ratfact import Rational

    big = Rational.zpk([], -1j * np.arange(1, 11), 1.0)
    with pytest.raises(SqueezeError, match="degree"):
        SqueezeTransform.general(big, 0.0, 0.0, 1.0)
