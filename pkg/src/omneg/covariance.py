"""Discretized covariance of the oscillator and temporal light modes.

Light is cut into boxcar modes f_k(s) = 1/sqrt(w_k) on non-overlapping
intervals, which are orthonormal, so vacuum input gives an identity block
and unit commutators.  Every quadrature is a filter bank acting on
independent unit-white sources; cross spectra are rational, and the
boxcar-averaged kernels are evaluated in closed form from their partial
fractions (no frequency grid, no aliasing).

Mode layout: [b1, b2, (v1, v2) per output mode, (u1, u2) per input mode].
Output modes live at physical times s < 0, ordered from the most recent
backwards; input modes (joint partition only) live at s > 0.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import toeplitz

from .ratfact import PartialFractions, Rational, real_line_integral, spectral_factorize
from .spectra import NoiseModel, OscillatorParams, susceptibility, white

SOURCES = ("xi1", "xi2", "nF", "nS", "e1", "e2")


class CovarianceError(ValueError):
    pass


@dataclass(frozen=True)
class ModeGrid:
    """Boxcar mode layout.

    ``n_modes`` output modes of width ``dt`` growing geometrically by
    ``growth`` per mode up to ``max_width`` (``growth = 1`` gives the plain
    uniform grid).  ``n_input`` input modes of width ``dt`` are added for
    the joint partition.
    """

    n_modes: int
    dt: float
    growth: float = 1.0
    max_width: float | None = None
    n_input: int = 0
    nyquist_factor: float = 5.0

    def __post_init__(self):
        if self.n_modes < 1:
            raise CovarianceError("need at least one output mode")
        if not self.dt > 0:
            raise CovarianceError("dt must be positive")
        if self.growth < 1:
            raise CovarianceError("growth must be >= 1")

    def widths(self) -> np.ndarray:
        w = self.dt * self.growth ** np.arange(self.n_modes)
        if self.max_width is not None:
            w = np.minimum(w, max(self.max_width, self.dt))
        return w

    @property
    def horizon(self) -> float:
        return float(np.sum(self.widths()))

    def output_modes(self):
        w = self.widths()
        edges = np.concatenate([[0.0], np.cumsum(w)])
        centers = -(edges[:-1] + edges[1:]) / 2
        return centers, w

    def input_modes(self):
        """Mirror image of the first ``n_input`` output modes, at s > 0."""
        c, w = self.output_modes()
        if self.n_input > self.n_modes:
            w = self.dt * self.growth ** np.arange(self.n_input)
            if self.max_width is not None:
                w = np.minimum(w, max(self.max_width, self.dt))
            edges = np.concatenate([[0.0], np.cumsum(w)])
            return (edges[:-1] + edges[1:]) / 2, w
        return -c[: self.n_input], w[: self.n_input]

    def is_uniform(self) -> bool:
        return self.growth == 1.0


@dataclass
class GaussianState:
    """Covariance, commutator matrix and a label per mode pair."""

    cov: np.ndarray
    comm: np.ndarray
    labels: tuple

    @property
    def n_modes(self) -> int:
        return self.cov.shape[0] // 2

    def partial_transpose(self) -> "GaussianState":
        return partial_transpose(self)

    def select(self, keep) -> "GaussianState":
        keep = np.asarray(keep, dtype=bool)
        idx = np.flatnonzero(np.repeat(keep, 2))
        labels = tuple(l for l, k in zip(self.labels, keep) if k)
        return GaussianState(self.cov[np.ix_(idx, idx)], self.comm[np.ix_(idx, idx)], labels)

    def min_heisenberg_eig(self) -> float:
        return float(np.linalg.eigvalsh(self.cov + 1j * self.comm)[0])

    def check_physical(self, tol=1e-8) -> bool:
        return self.min_heisenberg_eig() >= -tol * np.linalg.norm(self.cov, 2)

    def dump(self, path):
        """Write the covariance with one labelled header line."""
        names = []
        for k, lab in enumerate(self.labels):
            q = {"osc": ("b1", "b2"), "out": ("v1", "v2"), "in": ("u1", "u2")}[lab]
            names += [f"{q[0]}[{k}]", f"{q[1]}[{k}]"]
        np.savetxt(path, self.cov, delimiter=",", header=",".join(names), comments="# ")


def symplectic_form(n_modes: int) -> np.ndarray:
    return np.kron(np.eye(n_modes), np.array([[0.0, 1.0], [-1.0, 0.0]]))


def partial_transpose(s: GaussianState) -> GaussianState:
    """Flip the sign of the oscillator momentum b2 (rows and columns)."""
    if "osc" not in s.labels:
        raise CovarianceError("partial transpose needs the oscillator in the state")
    k = 2 * s.labels.index("osc") + 1
    sign = np.ones(s.cov.shape[0])
    sign[k] = -1.0
    return GaussianState(s.cov * sign[:, None] * sign[None, :], s.comm, s.labels)


# ----------------------------------------------------------------------
# transfer functions
# ----------------------------------------------------------------------


def _lin(*pairs):
    """Linear combination of source dictionaries: _lin((c1, d1), (c2, d2))."""
    out: dict[str, Rational] = {}
    for c, d in pairs:
        for k, v in d.items():
            term = v * c
            out[k] = out[k] + term if k in out else term
    return out


@dataclass
class TransferTable:
    """Quadrature -> {source -> frequency response} (all Rational)."""

    rows: dict
    params: OscillatorParams

    def response(self, quad: str, source: str, omega):
        r = self.rows[quad].get(source)
        return np.zeros_like(np.asarray(omega, dtype=complex)) if r is None else r(omega)

    def cross_spectrum(self, x: str, y: str) -> Rational:
        out = Rational()
        rx, ry = self.rows[x], self.rows[y]
        for src in set(rx) & set(ry):
            out = out + rx[src] * ry[src].conj()
        return out

    def max_rate(self) -> float:
        poles = [r.all_poles() for row in self.rows.values() for r in row.values()]
        poles = np.concatenate(poles) if poles else np.zeros(0)
        return float(np.max(np.abs(poles))) if poles.size else 0.0


def _whitening_filter(spec) -> Rational | None:
    if spec.is_zero():
        return None
    if spec.is_white():
        return Rational.const(np.sqrt(spec.scale * spec.num[0] / spec.den[0]))
    return spectral_factorize(spec.to_rational()).plus


def build_transfer_table(p: OscillatorParams, model: NoiseModel, sq=None) -> TransferTable:
    """Express b, v (and the input u) through the independent white sources.

    Detector loss (eta < 1) is modelled explicitly with a vacuum pair
    (e1, e2) mixing into the measured quadratures.
    """
    if p.gamma_m <= 0:
        raise CovarianceError("no stationary state: gamma_m must be positive")
    one = Rational.const(1.0)
    if sq is None:
        H = ((one, Rational()), (Rational(), one))
    else:
        H = sq.input_filter()
    u1 = {k: v for k, v in (("xi1", H[0][0]), ("xi2", H[0][1])) if v}
    u2 = {k: v for k, v in (("xi1", H[1][0]), ("xi2", H[1][1])) if v}
    fF = _whitening_filter(model.force())
    fS = _whitening_filter(model.sensing())
    nF = {"nF": fF} if fF is not None else {}
    nS = {"nS": fS} if fS is not None else {}
    chi = susceptibility(p)
    wm, wq, eta = p.omega_m, p.omega_q, p.eta
    force = _lin((wq * np.sqrt(wm), u1), (wm, nF))
    b1 = {k: chi * v for k, v in force.items()}
    dt_op = Rational.zpk([0.0], [], -1j / wm)
    b2 = {k: dt_op * v for k, v in b1.items()}
    v1 = _lin((np.sqrt(eta), u1))
    v2 = _lin((np.sqrt(eta), u2), (np.sqrt(eta) * wq / np.sqrt(wm), b1), (np.sqrt(eta) * wq / np.sqrt(wm), nS))
    if eta < 1:
        v1["e1"] = Rational.const(np.sqrt(1 - eta))
        v2["e2"] = Rational.const(np.sqrt(1 - eta))
    rows = {"b1": b1, "b2": b2, "v1": v1, "v2": v2, "u1": u1, "u2": u2}
    return TransferTable(rows, p)


def apply_passive_loss(p: OscillatorParams, model: NoiseModel):
    """Equivalent lossless system: omega_q -> sqrt(eta) omega_q plus white
    force noise omega_q^2 (1 - eta) / omega_m."""
    if not 0 < p.eta <= 1:
        raise CovarianceError("eta must lie in (0, 1]")
    if p.eta == 1:
        return p, model
    extra = white(p.omega_q**2 * (1 - p.eta) / p.omega_m)
    return p.with_(omega_q=np.sqrt(p.eta) * p.omega_q, eta=1.0), model.add_force(extra)


# ----------------------------------------------------------------------
# closed-form boxcar kernels
# ----------------------------------------------------------------------


@dataclass
class Kernel:
    """Time-domain kernel of one cross spectrum: delta part + simple poles."""

    delta: float
    poles: np.ndarray
    residues: np.ndarray
    at_zero: float

    @classmethod
    def from_spectrum(cls, S: Rational, split_rel: float = 1e-4) -> "Kernel":
        if not S:
            return cls(0.0, np.zeros(0, complex), np.zeros(0, complex), 0.0)
        pf = S.partial_fractions()
        poly = pf.poly
        if poly.size > 1 and np.any(np.abs(poly[1:]) > 1e-9 * max(1.0, abs(poly[0]))):
            raise CovarianceError("cross spectrum grows at high frequency")
        delta = complex(poly[0]) if poly.size else 0.0
        poles, res = _simple_poles(pf, split_rel)
        if np.any(np.abs(poles.imag) < 1e-12 * np.maximum(1.0, np.abs(poles))):
            raise CovarianceError("kernel pole on the real axis")
        strict = pf.to_rational(with_poly=False)
        at_zero = real_line_integral(strict) if pf.poles.size else 0.0
        return cls(float(delta.real), poles, res, float(np.real(at_zero)))


def _simple_poles(pf: PartialFractions, split_rel):
    """Residues at simple poles; a pole of order k is split symmetrically
    into k simple poles on a small circle around it."""
    poles, res = [], []
    for p, cs in zip(pf.poles, pf.coeffs):
        k = len(cs)
        if k == 1:
            poles.append(p)
            res.append(cs[0])
            continue
        h = split_rel * abs(p.imag)
        nodes = p + h * np.exp(2j * np.pi * np.arange(k) / k)
        # match sum_j c_j / (w - p)^(j+1) with sum_m r_m / (w - x_m) through
        # order k - 1; the first mismatch is O(h^k)
        V = np.array([[(x - p) ** j for x in nodes] for j in range(k)])
        r = np.linalg.solve(V, np.asarray(cs, complex))
        poles.extend(nodes)
        res.extend(r)
    return np.array(poles, complex), np.array(res, complex)


def _box_factor(p, w):
    """int over a width-w window of exp(-i p x) dx / sqrt(w), centered."""
    x = p * w / 2
    small = np.abs(x) < 1e-4
    safe = np.where(small, 1.0, x)
    val = np.where(small, 1.0 - x**2 / 6, np.sin(safe) / safe)
    return np.sqrt(w) * val


def _self_overlap(a, w):
    """int_0^w (w - u) exp(a u) du / w."""
    x = a * w
    small = np.abs(x) < 0.5
    out = np.empty(np.broadcast(x, w).shape, dtype=complex)
    xs = np.where(small, x, 0.0)
    series = np.zeros_like(out)
    term = np.full(out.shape, 0.5, dtype=complex)
    for n in range(2, 30):
        series = series + term
        term = term * xs / (n + 1)
    xl = np.where(small, 1.0, x)
    direct = (np.exp(xl) - 1 - xl) / xl**2
    out = np.where(small, series, direct)
    return out * w


def _block(K: Kernel, cA, wA, cB, wB, same: bool):
    """Kernel averaged over mode pairs of two groups.

    cA, cB are centers (physical time), wA, wB widths (0 = point mode)."""
    nA, nB = cA.size, cB.size
    out = np.zeros((nA, nB), dtype=complex)
    if nA == 0 or nB == 0:
        return out.real
    uniform = (
        same
        and nA > 2
        and np.allclose(np.diff(cA), cA[1] - cA[0], rtol=1e-12, atol=0)
        and np.allclose(wA, wA[0], rtol=1e-12, atol=0)
    )
    if uniform:
        step = cA[1] - cA[0]
        lags = np.arange(-(nA - 1), nA)
        D = -lags * step  # tau = c_i - c_j for j - i = lag
        vals = np.zeros(lags.size, dtype=complex)
        for p, r in zip(K.poles, K.residues):
            g2 = _box_factor(p, wA[0]) ** 2
            lower = p.imag < 0
            sel = D > 0 if lower else D < 0
            arg = np.where(sel, -1j * p * D, 0.0)
            vals += np.where(sel, (-1j if lower else 1j) * r * np.exp(arg) * g2, 0.0)
        zero = lags == 0
        vals[zero] = _diag_value(K, wA[:1])[0]
        row = vals[nA - 1:]  # lag >= 0 -> (i, j = i + lag)
        col = vals[nA - 1::-1]  # lag <= 0
        return toeplitz(col, row).real
    D = cA[:, None] - cB[None, :]
    for p, r in zip(K.poles, K.residues):
        lower = p.imag < 0
        sel = D > 0 if lower else D < 0
        fa = _point_or_box(p, wA)
        fb = _point_or_box(p, wB)
        arg = np.where(sel, -1j * p * D, 0.0)
        out += np.where(sel, (-1j if lower else 1j) * r * np.exp(arg), 0.0) * fa[:, None] * fb[None, :]
    if same:
        idx = np.arange(nA)
        out[idx, idx] = _diag_value(K, wA)
    return out.real


def _point_or_box(p, w):
    w = np.asarray(w, float)
    pos = w > 0
    ws = np.where(pos, w, 1.0)
    return np.where(pos, _box_factor(p, ws), 1.0)


def _diag_value(K: Kernel, w):
    w = np.asarray(w, float)
    out = np.full(w.shape, K.delta, dtype=complex)
    for p, r in zip(K.poles, K.residues):
        if p.imag < 0:
            out += -1j * r * _self_overlap(-1j * p, w)
        else:
            out += 1j * r * _self_overlap(1j * p, w)
    return out


QUADS = {"osc": ("b1", "b2"), "out": ("v1", "v2"), "in": ("u1", "u2")}


def build_covariance(table: TransferTable, grid: ModeGrid, partition: str = "output",
                     check_nyquist: bool = True) -> GaussianState:
    """Covariance of [oscillator, output modes (, input modes)]."""
    if partition not in ("output", "joint"):
        raise CovarianceError(f"unknown partition {partition!r}")
    if check_nyquist:
        rate = table.max_rate()
        if np.pi / grid.dt < grid.nyquist_factor * rate:
            raise CovarianceError(
                f"Nyquist violation: pi/dt = {np.pi / grid.dt:.4g} rad/s is below "
                f"{grid.nyquist_factor} x the fastest rate {rate:.4g} rad/s"
            )
    groups = [("osc", np.zeros(1), np.zeros(1))]
    c, w = grid.output_modes()
    groups.append(("out", c, w))
    if partition == "joint":
        if grid.n_input < 1:
            raise CovarianceError("joint partition needs n_input >= 1")
        ci, wi = grid.input_modes()
        groups.append(("in", ci, wi))
    sizes = [g[1].size for g in groups]
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    n = int(offsets[-1])
    cov = np.zeros((2 * n, 2 * n))
    kernels: dict = {}
    for a, (ka, ca, wa) in enumerate(groups):
        for b, (kb, cb, wb) in enumerate(groups):
            if b < a:
                continue
            for qa_i, qa in enumerate(QUADS[ka]):
                for qb_i, qb in enumerate(QUADS[kb]):
                    if a == b and qb_i < qa_i:
                        continue
                    key = (qa, qb)
                    if key not in kernels:
                        kernels[key] = Kernel.from_spectrum(table.cross_spectrum(qa, qb))
                    K = kernels[key]
                    if ka == "osc" and kb == "osc":
                        blk = np.array([[K.at_zero]])
                    else:
                        blk = _block(K, ca, wa, cb, wb, same=(a == b))
                    ra = 2 * offsets[a] + qa_i + 2 * np.arange(ca.size)
                    rb = 2 * offsets[b] + qb_i + 2 * np.arange(cb.size)
                    cov[np.ix_(ra, rb)] = blk
                    cov[np.ix_(rb, ra)] = blk.T
    labels = tuple(k for (k, ca, _) in groups for _ in range(ca.size))
    return GaussianState(cov, symplectic_form(n), labels)


def default_horizon(p: OscillatorParams, omega_s: float, omega_n: float, cap: float = 1e4) -> float:
    """max(10 / gamma_eff, 20 / sqrt(omega_s omega_n)), with gamma_eff the
    amplitude decay rate gamma_m / 2 of the mechanical kernels."""
    h = max(10.0 / (0.5 * p.gamma_m), 20.0 / np.sqrt(omega_s * omega_n))
    if h > cap:
        warnings.warn(f"horizon {h:.3g} s capped at {cap:.3g} s", stacklevel=2)
        h = cap
    return h


def discretized_state(p: OscillatorParams, model: NoiseModel, grid: ModeGrid, sq=None,
                      partition: str = "output", check_nyquist: bool = True) -> GaussianState:
    table = build_transfer_table(p, model, sq)
    return build_covariance(table, grid, partition, check_nyquist)
