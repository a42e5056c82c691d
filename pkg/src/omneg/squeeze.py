"""Causal symplectic transformations of the input light.

A transform maps the pre-squeezer vacuum pair xi onto the input u = H xi.
Every covariance depends on H only through the spectral matrix
H H^dagger = [[T1, T12], [T12, T2]], so the causal phase exp(i phi) that
makes a real (A, B, C, D) realizable is never needed.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .ratfact import Rational
from .spectra import OscillatorParams, mech_susceptibility

KINDS = ("none", "constant", "rotation", "filter_cavity", "general")
MAX_DEGREE = 8


class SqueezeError(ValueError):
    pass


def _const(c) -> Rational:
    return Rational.const(c) if c != 0 else Rational()


@dataclass(frozen=True)
class SqueezeTransform:
    kind: str = "none"
    r: float = 0.0
    theta: float = 0.0
    gamma_c: float = 0.0
    delta_c: float = 0.0
    pre_rotation: float = 0.0
    entries: tuple | None = None  # (A, B, C, D) as Rational, for kind="general"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SqueezeError(f"unknown squeeze kind {self.kind!r}")
        if self.kind == "filter_cavity" and not self.gamma_c > 0:
            raise SqueezeError("filter cavity needs gamma_c > 0")
        if self.kind == "general":
            if self.entries is None or len(self.entries) != 4:
                raise SqueezeError("general transform needs (A, B, C, D)")
            for e in self.entries:
                if e and max(len(p) for _, _, p in e.terms) > MAX_DEGREE:
                    raise SqueezeError(f"entries above degree {MAX_DEGREE} are not supported; split the transform")

    # -- constructors ------------------------------------------------------
    @classmethod
    def none(cls):
        return cls("none")

    @classmethod
    def constant(cls, r: float, theta: float = 0.0):
        return cls("constant", r=r, theta=theta)

    @classmethod
    def rotation(cls, theta: float):
        return cls("rotation", theta=theta)

    @classmethod
    def general(cls, A, B, C, D):
        return cls("general", entries=tuple(x if isinstance(x, Rational) else _const(x) for x in (A, B, C, D)))

    # -- transfer matrix -----------------------------------------------------
    def input_filter(self):
        """2x2 nested tuple of Rational: u = H xi."""
        if self.kind == "none":
            return ((_const(1.0), Rational()), (Rational(), _const(1.0)))
        if self.kind == "rotation":
            c, s = np.cos(self.theta), np.sin(self.theta)
            return ((_const(c), _const(-s)), (_const(s), _const(c)))
        if self.kind == "constant":
            c, s = np.cos(self.theta), np.sin(self.theta)
            er, emr = np.exp(self.r), np.exp(-self.r)
            # R(theta) diag(e^r, e^-r)
            return ((_const(c * er), _const(-s * emr)), (_const(s * er), _const(c * emr)))
        if self.kind == "filter_cavity":
            return fd_filter_matrix(self.r, self.gamma_c, self.delta_c, self.pre_rotation)
        A, B, C, D = self.entries
        return ((A, B), (C, D))

    def matrix(self, omega) -> np.ndarray:
        """H evaluated on a grid; shape (len(omega), 2, 2)."""
        omega = np.atleast_1d(np.asarray(omega, dtype=float))
        H = self.input_filter()
        out = np.zeros(omega.shape + (2, 2), dtype=complex)
        for i in range(2):
            for j in range(2):
                if H[i][j]:
                    out[:, i, j] = H[i][j](omega)
        return out

    def T(self, omega):
        """(T1, T2, T12) on a grid."""
        H = self.matrix(omega)
        S = H @ np.conj(np.swapaxes(H, -1, -2))
        return S[:, 0, 0].real, S[:, 1, 1].real, S[:, 0, 1]

    def is_frequency_dependent(self) -> bool:
        return self.kind in ("filter_cavity", "general")

    def to_config(self) -> dict:
        if self.kind == "general":
            raise SqueezeError("general transforms are not serializable to config")
        return {"type": self.kind, "r": self.r, "theta": self.theta, "gamma_c": self.gamma_c,
                "delta_c": self.delta_c, "pre_rotation": self.pre_rotation}


def fd_filter_matrix(r, gamma_c, delta_c, pre_rotation=0.0):
    """Detuned cavity after constant squeezing:
    (1/C) [[w^2 + g^2 - d^2, -2 g d], [2 g d, w^2 + g^2 - d^2]] diag(e^r, e^-r),
    C = d^2 - (w + i g)^2, optionally preceded by a quadrature rotation."""
    g, d = gamma_c, delta_c
    poles = np.array([-1j * g + d, -1j * g - d])
    # 1/C = -1 / ((w - p1)(w - p2))
    diag_num = Rational.zpk(np.array([1j * np.sqrt(complex(g**2 - d**2)), -1j * np.sqrt(complex(g**2 - d**2))]), poles, -1.0)
    off = Rational.zpk([], poles, 2 * g * d)  # -(-2 g d) / ((w - p1)(w - p2))
    er, emr = np.exp(r), np.exp(-r)
    c, s = np.cos(pre_rotation), np.sin(pre_rotation)
    # cavity @ diag(e^r, e^-r) @ R(pre_rotation)
    m = ((diag_num * er, off * emr), (off * (-er), diag_num * emr))
    rot = ((c, -s), (s, c))
    out = []
    for i in range(2):
        row = []
        for j in range(2):
            acc = Rational()
            for k in range(2):
                if rot[k][j] != 0:
                    acc = acc + m[i][k] * rot[k][j]
            row.append(acc)
        out.append(tuple(row))
    return tuple(out)


def fd_squeeze_transform(r: float, gamma_c: float, delta_c: float, pre_rotation: float = 0.0) -> SqueezeTransform:
    if not gamma_c > 0:
        raise SqueezeError("gamma_c must be positive")
    return SqueezeTransform("filter_cavity", r=r, gamma_c=gamma_c, delta_c=delta_c, pre_rotation=pre_rotation)


def filter_cavity_params(p: OscillatorParams) -> tuple[float, float]:
    """Linewidth and detuning that squeeze shot noise and back action alike."""
    if p.omega_q == 0:
        raise SqueezeError("degenerate filter cavity: omega_q = 0 gives gamma_c = 0")
    if p.gamma_m > 0.1 * p.omega_m:
        warnings.warn("filter-cavity parameters assume a high-Q oscillator", stacklevel=2)
    wm2 = p.omega_m**2
    g = np.sqrt((-wm2 + np.sqrt(wm2**2 + p.omega_q**4)) / 2)
    return float(g), float(p.omega_q**2 / (2 * g))


@dataclass
class SymplecticReport:
    ok: bool
    worst_omega: float
    det_error: float
    t_error: float
    t1_min: float

    def __bool__(self):
        return self.ok


def validate_symplectic(sq: SqueezeTransform, grid=None, tol: float = 1e-10) -> SymplecticReport:
    """Check A D - B C = 1 (up to the causal phase), real T12 and T1 > 0.

    With H = exp(i phi) [[A, B], [C, D]]: |det H| = 1, H^dagger-products
    real, T1 T2 - T12^2 = 1.
    """
    if grid is None:
        grid = np.concatenate([-np.logspace(-3, 3, 500), np.logspace(-3, 3, 500)])
    H = sq.matrix(grid)
    det = H[:, 0, 0] * H[:, 1, 1] - H[:, 0, 1] * H[:, 1, 0]
    det_err = np.abs(np.abs(det) - 1.0)
    T1, T2, T12 = sq.T(grid)
    # realness of conj(S11) S21 and conj(S12) S22
    real_err = np.abs(np.imag(np.conj(H[:, 0, 0]) * H[:, 1, 0])) + np.abs(np.imag(np.conj(H[:, 0, 1]) * H[:, 1, 1]))
    t_err = np.abs(T1 * T2 - np.abs(T12) ** 2 - 1.0) + real_err
    worst = int(np.argmax(det_err + t_err))
    ok = bool(np.all(det_err <= tol * 10) and np.all(t_err <= tol * 10 * np.maximum(1, T1 * T2)) and np.all(T1 > 0))
    return SymplecticReport(ok, float(grid[worst]), float(det_err.max()), float(t_err.max()), float(T1.min()))


def rtr_matrix(r, theta, rho):
    """Real symplectic matrix from the (r, theta, rho) parametrization;
    arguments may be arrays evaluated on a frequency grid."""
    ch, sh = np.cosh(r), np.sinh(r)
    A = np.cos(theta) * ch + np.cos(rho) * sh
    B = -np.sin(theta) * ch + np.sin(rho) * sh
    C = np.sin(theta) * ch + np.sin(rho) * sh
    D = np.cos(theta) * ch - np.cos(rho) * sh
    return A, B, C, D


def quantum_noise_spectrum(p: OscillatorParams, sq: SqueezeTransform | None = None):
    """Omega -> spectrum of v2 due to the light's own fluctuations."""
    sq = sq or SqueezeTransform.none()

    def spectrum(omega):
        omega = np.atleast_1d(np.asarray(omega, dtype=float))
        H = sq.matrix(omega)
        k = p.omega_q**2 * mech_susceptibility(p, omega)
        row = H[:, 1, :] + k[:, None] * H[:, 0, :]
        return np.sum(np.abs(row) ** 2, axis=1)

    return spectrum


def random_fd_squeezer(rng: np.random.Generator, p: OscillatorParams, r_max: float = 1.5) -> SqueezeTransform:
    """Filter cavity with random squeezing, linewidth, detuning and input
    quadrature angle, on the mechanical and coupling frequency scales."""
    scale = max(p.omega_q, p.omega_m)
    r = float(rng.uniform(0.2, r_max))
    g = float(scale * np.exp(rng.uniform(np.log(0.1), np.log(3.0))))
    d = float(scale * rng.uniform(-2.0, 2.0))
    ang = float(rng.uniform(0, np.pi))
    return fd_squeeze_transform(r, g, d, ang)
