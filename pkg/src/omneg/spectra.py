"""Oscillator parameters, noise spectra and susceptibilities.

All frequencies are angular [rad/s].  Quadratures are normalized so that
the vacuum covariance is the identity: [b1, b2] = 2i and
[u1(t), u2(t')] = 2i delta(t - t').
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.polynomial import polynomial as P

from .ratfact import Rational

HBAR = 1.054571817e-34
TWO_PI = 2.0 * np.pi


class SpectrumError(ValueError):
    pass


@dataclass(frozen=True)
class OscillatorParams:
    omega_m: float
    gamma_m: float
    omega_q: float
    eta: float = 1.0

    def __post_init__(self):
        if not self.omega_m > 0:
            raise SpectrumError("omega_m must be positive")
        if self.gamma_m < 0:
            raise SpectrumError("gamma_m must be non-negative")
        if self.omega_q < 0:
            raise SpectrumError("omega_q must be non-negative")
        if not 0 < self.eta <= 1:
            raise SpectrumError("eta must lie in (0, 1]")

    @classmethod
    def from_hz(cls, f_m, g_m, f_q, eta=1.0):
        return cls(TWO_PI * f_m, TWO_PI * g_m, TWO_PI * f_q, eta)

    def with_(self, **kw) -> "OscillatorParams":
        d = dict(omega_m=self.omega_m, gamma_m=self.gamma_m, omega_q=self.omega_q, eta=self.eta)
        d.update(kw)
        return OscillatorParams(**d)

    def mech_poles(self) -> np.ndarray:
        """The two (lower half-plane) poles of chi."""
        if self.gamma_m == 0:
            raise SpectrumError("undamped resonance: chi has poles on the real axis")
        disc = self.omega_m**2 - 0.25 * self.gamma_m**2
        half = -0.5j * self.gamma_m
        if disc >= 0:
            s = np.sqrt(disc)
            return np.array([half + s, half - s])
        s = 1j * np.sqrt(-disc)
        return np.array([half + s, half - s])


@dataclass(frozen=True)
class RationalSpectrum:
    """scale * num(w) / den(w); coefficients in ascending powers of w."""

    num: tuple
    den: tuple = (1.0,)
    scale: float = 1.0

    def __post_init__(self):
        num = tuple(float(x) for x in np.trim_zeros(np.asarray(self.num, float), "b")) or (0.0,)
        den = tuple(float(x) for x in np.trim_zeros(np.asarray(self.den, float), "b"))
        if not den:
            raise SpectrumError("denominator is identically zero")
        if self.scale < 0:
            raise SpectrumError("scale must be non-negative")
        object.__setattr__(self, "num", num)
        object.__setattr__(self, "den", den)
        if any(x != 0 for x in num[1::2]) or any(x != 0 for x in den[1::2]):
            # odd coefficients are allowed only if they cancel in the ratio
            w = np.linspace(0.1, 10.0, 7) * max(1.0, _root_scale(den))
            if not np.allclose(self(w), self(-w), rtol=1e-10, atol=0):
                raise SpectrumError("spectrum is not even in frequency")
        den_roots = np.roots(np.asarray(den)[::-1]) if len(den) > 1 else np.zeros(0)
        if np.any(np.abs(den_roots.imag) <= 1e-12 * max(1.0, _root_scale(den))):
            raise SpectrumError("denominator has a real root")
        if len(num) > len(den):
            raise SpectrumError("spectrum grows at high frequency")

    def __call__(self, w):
        w = np.asarray(w, dtype=float)
        return self.scale * P.polyval(w, self.num) / P.polyval(w, self.den)

    def to_rational(self) -> Rational:
        if self.scale == 0 or not any(self.num):
            return Rational()
        return Rational.from_coeffs(np.asarray(self.num) * self.scale, self.den)

    def is_zero(self) -> bool:
        return self.scale == 0 or not any(self.num)

    def is_white(self) -> bool:
        return len(self.num) == 1 and len(self.den) == 1

    def check_nonnegative(self, grid=None) -> bool:
        if grid is None:
            s = max(1.0, _root_scale(self.den), _root_scale(self.num))
            grid = s * np.concatenate([-np.logspace(-3, 3, 500), np.logspace(-3, 3, 500)])
        return bool(np.all(self(grid) >= 0))

    def scaled(self, c: float) -> "RationalSpectrum":
        return RationalSpectrum(self.num, self.den, self.scale * c)

    def __add__(self, other: "RationalSpectrum") -> "RationalSpectrum":
        num = P.polyadd(
            P.polymul(np.asarray(self.num) * self.scale, other.den),
            P.polymul(np.asarray(other.num) * other.scale, self.den),
        )
        den = P.polymul(self.den, other.den)
        return RationalSpectrum(tuple(num), tuple(den), 1.0)

    def to_config(self) -> dict:
        return {"type": "rational", "num": list(self.num), "den": list(self.den), "scale": self.scale}

    @classmethod
    def from_config(cls, cfg: dict) -> "RationalSpectrum":
        kind = cfg.get("type", "rational")
        if kind == "white":
            return white(float(cfg["level"]))
        if kind != "rational":
            raise SpectrumError(f"unknown spectrum type {kind!r}")
        return cls(tuple(cfg["num"]), tuple(cfg.get("den", (1.0,))), float(cfg.get("scale", 1.0)))


def _root_scale(coeffs) -> float:
    c = np.trim_zeros(np.asarray(coeffs, float), "b")
    if c.size < 2:
        return 1.0
    r = np.abs(np.roots(c[::-1]))
    r = r[r > 0]
    return float(np.max(r)) if r.size else 1.0


def white(level: float) -> RationalSpectrum:
    if level < 0:
        raise SpectrumError("white level must be non-negative")
    return RationalSpectrum((1.0,), (1.0,), float(level))


def zero_spectrum() -> RationalSpectrum:
    return RationalSpectrum((0.0,), (1.0,), 0.0)


def lorentzian(height: float, width: float, center: float = 0.0) -> RationalSpectrum:
    """Even Lorentzian peak(s) of the given height at +-center."""
    if width <= 0:
        raise SpectrumError("width must be positive")
    w2 = width**2
    if center == 0:
        return RationalSpectrum((w2,), (w2, 0.0, 1.0), height)
    # w^2 / ((w - c)^2 + w^2) + (w -> -w), combined over a common denominator
    a = center**2 + w2
    den = P.polymul((a, -2 * center, 1.0), (a, 2 * center, 1.0))
    num = P.polymul((w2,), (2 * a, 0.0, 2.0))
    peak = P.polyval(center, num) / P.polyval(center, den)
    return RationalSpectrum(tuple(num), tuple(den), height / peak)


@dataclass(frozen=True)
class NoiseModel:
    force_spectrum: RationalSpectrum
    sensing_spectrum: RationalSpectrum
    force_scale: float = 1.0
    sensing_scale: float = 1.0

    def __post_init__(self):
        if self.force_scale < 0 or self.sensing_scale < 0:
            raise SpectrumError("noise scales must be non-negative")

    def force(self) -> RationalSpectrum:
        return self.force_spectrum.scaled(self.force_scale)

    def sensing(self) -> RationalSpectrum:
        return self.sensing_spectrum.scaled(self.sensing_scale)

    def with_scales(self, force_scale=None, sensing_scale=None) -> "NoiseModel":
        return NoiseModel(
            self.force_spectrum,
            self.sensing_spectrum,
            self.force_scale if force_scale is None else force_scale,
            self.sensing_scale if sensing_scale is None else sensing_scale,
        )

    def add_force(self, extra: RationalSpectrum) -> "NoiseModel":
        return NoiseModel(self.force() + extra, self.sensing(), 1.0, 1.0)


@dataclass(frozen=True)
class WhiteNoiseParams:
    omega_f: float
    omega_s: float

    def __post_init__(self):
        if self.omega_f < 0:
            raise SpectrumError("omega_f must be non-negative")
        if self.omega_s <= 0:
            raise SpectrumError("infinite sensing noise: omega_s must be positive")


def white_noise_model(w: WhiteNoiseParams, p: OscillatorParams) -> NoiseModel:
    return NoiseModel(white(2 * w.omega_f**2 / p.omega_m), white(2 * p.omega_m / w.omega_s**2))


def mech_susceptibility(p: OscillatorParams, omega):
    omega = np.asarray(omega, dtype=float)
    den = -(omega**2) - 1j * p.gamma_m * omega + p.omega_m**2
    if np.any(den == 0):
        raise SpectrumError("undamped resonance: chi diverges at omega = omega_m")
    return 1.0 / den


def susceptibility(p: OscillatorParams) -> Rational:
    """chi as a rational function: -1 / ((w - p1)(w - p2))."""
    return Rational.zpk([], p.mech_poles(), -1.0)


def abs_chi_sq(p: OscillatorParams) -> Rational:
    chi = susceptibility(p)
    return chi * chi.conj()


def chi_F(model: NoiseModel, p: OscillatorParams, omega):
    return p.omega_m * np.abs(mech_susceptibility(p, omega)) ** 2 * model.force()(omega)


def chi_S(model: NoiseModel, p: OscillatorParams, omega):
    return model.sensing()(omega) / p.omega_m


def chi_EN(model: NoiseModel, p: OscillatorParams, omega):
    return chi_F(model, p, omega) + chi_S(model, p, omega)


def chi_F_rational(model: NoiseModel, p: OscillatorParams) -> Rational:
    return abs_chi_sq(p) * model.force().to_rational() * p.omega_m


def chi_S_rational(model: NoiseModel, p: OscillatorParams) -> Rational:
    return model.sensing().to_rational() * (1.0 / p.omega_m)


def fdt_white_limit(temperature_ratio: float, p: OscillatorParams) -> RationalSpectrum:
    """High-temperature white force spectrum 2 gamma_m (2 k T / hbar omega_m)."""
    if temperature_ratio < 1:
        raise SpectrumError("outside high-temperature validity (temperature_ratio < 1)")
    return white(2 * p.gamma_m * temperature_ratio)


def to_dimensionless(
    mass: float,
    force_psd: RationalSpectrum,
    position_psd: RationalSpectrum,
    p: OscillatorParams,
    hbar: float = HBAR,
) -> NoiseModel:
    """Convert force [N^2/Hz] and position [m^2/Hz] noise to quadrature units."""
    if mass <= 0:
        raise SpectrumError("mass must be positive")
    kf = 2.0 / (hbar * mass * p.omega_m)
    ks = 2.0 * mass * p.omega_m / hbar
    return NoiseModel(force_psd.scaled(kf), position_psd.scaled(ks))


def to_physical(mass: float, model: NoiseModel, p: OscillatorParams, hbar: float = HBAR):
    """Inverse of :func:`to_dimensionless`; returns (force_psd, position_psd)."""
    if mass <= 0:
        raise SpectrumError("mass must be positive")
    kf = 2.0 / (hbar * mass * p.omega_m)
    ks = 2.0 * mass * p.omega_m / hbar
    return model.force().scaled(1.0 / kf), model.sensing().scaled(1.0 / ks)


def random_spectrum(rng: np.random.Generator, max_degree: int = 8, floor: float | None = None,
                    scale: float = 1.0) -> RationalSpectrum:
    """A random even non-negative spectrum: white floor plus Lorentzian peaks.

    The denominator degree is at most ``max_degree``.
    """
    n_peaks = int(rng.integers(1, max(1, max_degree // 4) + 1))
    level = float(rng.uniform(0.05, 1.0)) if floor is None else floor
    s = white(level) if level > 0 else zero_spectrum()
    for _ in range(n_peaks):
        center = float(rng.choice([0.0, rng.uniform(0.3, 3.0)])) * scale
        width = float(rng.uniform(0.1, 2.0)) * scale
        height = float(rng.uniform(0.2, 5.0))
        peak = lorentzian(height, width, center)
        s = peak if s.is_zero() else s + peak
    return s


def fdt_respecting_spectrum(rng: np.random.Generator, p: OscillatorParams, cutoff: float = 1e2,
                            n_peaks: int | None = None) -> RationalSpectrum:
    """Random force spectrum obeying omega_m S(w) >= 2 gamma_m |w| below a
    cutoff frequency ``cutoff * omega_m``.

    Built as kappa gamma_m (w^2 + a^2) / (a omega_m) rolled off at the
    cutoff (kappa >= 2 keeps the bound up to the roll-off), plus
    non-negative Lorentzian peaks.  Denominator degree stays <= 8.
    """
    if p.gamma_m <= 0:
        raise SpectrumError("gamma_m must be positive")
    wm, g = p.omega_m, p.gamma_m
    a = wm * float(np.exp(rng.uniform(np.log(0.2), np.log(5.0))))
    kappa = float(rng.uniform(2.0, 4.0))
    lam = cutoff * wm
    c = kappa * g / (a * wm) * lam**2
    s = RationalSpectrum((c * a * a, 0.0, c), (lam**2, 0.0, 1.0))
    k = int(rng.integers(0, 3)) if n_peaks is None else n_peaks
    budget = 6  # denominator degree left after the base term
    for _ in range(k):
        height = float(rng.uniform(0.1, 5.0)) * g
        width = float(rng.uniform(0.05, 1.0)) * wm
        center = float(rng.choice([0.0, rng.uniform(0.3, 2.0)])) * wm
        cost = 2 if center == 0 else 4
        if cost > budget:
            break
        budget -= cost
        s = s + lorentzian(height, width, center)
    return s
