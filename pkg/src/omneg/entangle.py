"""Entanglement tests: PPT symplectic spectra, log-negativity, and the
Wiener-Hopf indicator for the oscillator against its output light."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.linalg import cholesky, eigvalsh, ldl, solve_triangular
from scipy.optimize import brentq
from scipy.sparse.linalg import LinearOperator, eigsh

from .covariance import (
    GaussianState,
    ModeGrid,
    apply_passive_loss,
    discretized_state,
    partial_transpose,
    symplectic_form,
)
from .ratfact import (
    Rational,
    causal_derivative,
    causal_project,
    real_line_integral,
    spectral_factorize,
    wiener_hopf_solve,
)
from .spectra import (
    NoiseModel,
    OscillatorParams,
    RationalSpectrum,
    WhiteNoiseParams,
    abs_chi_sq,
    chi_F_rational,
    susceptibility,
    white,
)

# E_N uses the natural logarithm
LOG = np.log
ENTANGLED_TOL = 1e-6
DENSE_LIMIT = 600


class EntanglementError(RuntimeError):
    pass


class NoTransitionError(ValueError):
    pass


# ----------------------------------------------------------------------
# symplectic spectra
# ----------------------------------------------------------------------


def _cholesky_form(cov, comm):
    try:
        L = cholesky(cov, lower=True)
    except np.linalg.LinAlgError as exc:
        raise EntanglementError("covariance is not positive definite") from exc
    return L, L.T @ comm @ L


def symplectic_eigenvalues(s: GaussianState, k: int | None = None) -> np.ndarray:
    """Symplectic eigenvalues of ``s``, ascending, one per mode.

    With ``k == 1`` and a large state only the smallest one is computed,
    by Lanczos on (A^T A)^-1 with A = L^T K L and cov = L L^T.
    """
    n = s.n_modes
    if k is None or 2 * n <= DENSE_LIMIT:
        _, A = _cholesky_form(s.cov, s.comm)
        ev = eigvalsh(1j * A)
        nu = np.sort(ev[n:])
        return nu if k is None else nu[:k]
    if k != 1:
        raise ValueError("the large-state path returns the smallest eigenvalue only (k=1)")
    return np.array([_smallest_symplectic(s.cov, s.comm)])


def _smallest_symplectic(cov, comm) -> float:
    dim = cov.shape[0]
    if not np.array_equal(comm, symplectic_form(dim // 2)):
        raise EntanglementError("fast path needs the canonical commutator layout")
    L, _ = _cholesky_form(cov, comm)

    def kmul(x):
        y = np.empty_like(x)
        y[0::2] = x[1::2]
        y[1::2] = -x[0::2]
        return y

    def apply(x):
        # A^-T = L^-1 K L^-T and A^-1 = -A^-T, so (A^T A)^-1 = -A^-T A^-T
        y = solve_triangular(L, kmul(solve_triangular(L, np.ravel(x), lower=True, trans="T")), lower=True)
        z = solve_triangular(L, kmul(solve_triangular(L, y, lower=True, trans="T")), lower=True)
        return -z

    # a clustered spectrum near 1 stalls Lanczos; past roughly the cost of
    # a dense solve, switch to the dense path
    budget = [max(150, dim // 10)]

    def counted(x):
        budget[0] -= 1
        if budget[0] < 0:
            raise _LanczosStalled
        return apply(x)

    op = LinearOperator((dim, dim), matvec=counted, dtype=float)
    v0 = np.ones(dim) / np.sqrt(dim)
    try:
        # each symplectic eigenvalue appears twice; ask for the top pair
        vals = eigsh(op, k=2, which="LA", v0=v0, return_eigenvectors=False, tol=1e-12, maxiter=20 * dim)
    except _LanczosStalled:
        Lk = L.T @ comm @ L
        return float(np.sort(eigvalsh(1j * Lk))[dim // 2])
    return float(1.0 / np.sqrt(np.max(vals)))


class _LanczosStalled(Exception):
    pass


def count_below(s: GaussianState, level: float = 1 - ENTANGLED_TOL) -> int:
    """Number of symplectic eigenvalues below ``level`` (Sylvester inertia
    of cov + i level comm, via a Hermitian LDL^T factorization)."""
    _, d, _ = ldl(s.cov + 1j * level * s.comm, hermitian=True)
    neg, i, n = 0, 0, d.shape[0]
    while i < n:
        if i + 1 < n and d[i + 1, i] != 0:
            neg += int(np.sum(np.linalg.eigvalsh(d[i:i + 2, i:i + 2]) < 0))
            i += 2
        else:
            neg += int(d[i, i].real < 0)
            i += 1
    return neg


@dataclass
class NegativityResult:
    log_neg: float
    min_sympl_eig: float
    sympl_spectrum: np.ndarray

    @property
    def entangled(self) -> bool:
        return self.min_sympl_eig < 1 - ENTANGLED_TOL


def log_negativity(s: GaussianState, transpose: bool = True, dense: bool | None = None) -> NegativityResult:
    """E_N = sum_j max(0, -ln nu_j) over the partially transposed spectrum.

    Large states use the smallest eigenvalue only; an inertia count
    confirms that no other eigenvalue lies below 1, so E_N is exact.
    """
    pt = partial_transpose(s) if transpose else s
    if dense is None:
        dense = 2 * pt.n_modes <= DENSE_LIMIT
    if dense:
        nu = symplectic_eigenvalues(pt)
        n_below = int(np.count_nonzero(nu < 1 - ENTANGLED_TOL))
    else:
        nu = symplectic_eigenvalues(pt, 1)
        n_below = count_below(pt)
    if transpose and n_below > 1:
        raise EntanglementError(f"{n_below} PT symplectic eigenvalues below 1; expected at most one")
    e_n = float(np.sum(np.maximum(0.0, -LOG(nu))))
    return NegativityResult(e_n, float(nu[0]), nu)


def two_mode_squeezed(r: float) -> GaussianState:
    """TMSV with modes labelled (oscillator, output)."""
    c, s = np.cosh(2 * r), np.sinh(2 * r)
    cov = np.array([[c, 0, s, 0], [0, c, 0, -s], [s, 0, c, 0], [0, -s, 0, c]])
    return GaussianState(cov, symplectic_form(2), ("osc", "out"))


def negativity_for(p: OscillatorParams, model: NoiseModel, grid: ModeGrid, sq=None,
                   partition: str = "output") -> NegativityResult:
    return log_negativity(discretized_state(p, model, grid, sq, partition))


# ----------------------------------------------------------------------
# Wiener-Hopf indicator
# ----------------------------------------------------------------------


@dataclass
class IndicatorResult:
    det_value: float
    matrix_2x2: np.ndarray
    entangled: bool
    eps: float = 0.0
    details: dict = field(default_factory=dict)


def _effective(p: OscillatorParams, model: NoiseModel, sq=None):
    """Fold loss and constant squeezing into an equivalent vacuum system."""
    if sq is not None:
        kind = sq.kind
        if kind == "constant":
            p = p.with_(omega_q=p.omega_q * np.exp(sq.r))
        elif kind not in ("none", "rotation"):
            raise ValueError(
                "the indicator handles vacuum or frequency-independent squeezing only; "
                "use the discretized path for frequency-dependent squeezing"
            )
    return apply_passive_loss(p, model)


def _record_kernel(p: OscillatorParams, model: NoiseModel, eps: float) -> Rational:
    """Spectrum of M(t) = O_q^2 chi_EN(t) - i O_q^2 (chi(t) - chi(-t))."""
    chi_f = chi_F_rational(model, p)
    sens = model.sensing()
    if eps:
        sens = sens + white(eps) if not sens.is_zero() else white(eps)
    m = chi_f + sens.to_rational() * (1.0 / p.omega_m) + abs_chi_sq(p).times_w() * (2 * p.gamma_m)
    return m * p.omega_q**2


def _has_floor(model: NoiseModel) -> bool:
    s = model.sensing()
    return not s.is_zero() and len(s.num) == len(s.den)


def _indicator_matrix(p: OscillatorParams, model: NoiseModel, eps: float) -> np.ndarray:
    wm, wq = p.omega_m, p.omega_q
    chi = susceptibility(p)
    chi_f = chi_F_rational(model, p)
    m = _record_kernel(p, model, eps)
    factors = spectral_factorize(m.reflect())
    if chi_f:
        vbb = np.diag([wm * real_line_integral(chi_f).real, real_line_integral(chi_f.times_w(2)).real / wm])
        q1 = (chi * 1j - causal_project(chi_f)) * (np.sqrt(wm) * wq)
    else:
        vbb = np.zeros((2, 2))
        q1 = chi * (1j * np.sqrt(wm) * wq)
    q2 = causal_derivative(q1) * (-1.0 / wm)
    qs = (q1, q2)
    hs = [wiener_hopf_solve(factors, q.conj_reflect()) for q in qs]
    T = np.empty((2, 2), dtype=complex)
    for a in range(2):
        qa = qs[a].reflect()
        for b in range(2):
            T[a, b] = real_line_integral(qa * hs[b])
    kb = np.array([[0.0, 1.0], [-1.0, 0.0]])
    return vbb + 1j * kb - T


def _hermitian_det(V) -> float:
    return float((V[0, 0].real * V[1, 1].real) - abs(V[0, 1]) ** 2)


def indicator(p: OscillatorParams, model: NoiseModel, sq=None, eps: float | None = None,
              n_richardson: int = 3) -> IndicatorResult:
    """2x2 Schur complement of the PPT test in the continuum limit.

    When the sensing spectrum has no high-frequency floor the record
    kernel is regularized by a white sensing term ``eps`` that is removed
    by Richardson extrapolation over eps, eps/2, eps/4, ...
    """
    if p.gamma_m <= 0:
        raise ValueError("no stationary state: gamma_m must be positive")
    p_eff, m_eff = _effective(p, model, sq)
    if eps is None:
        eps = 0.0 if _has_floor(m_eff) else 1e-6 * 2.0 / p.omega_m
    if eps == 0:
        V = _indicator_matrix(p_eff, m_eff, 0.0)
        V = 0.5 * (V + V.conj().T)
        det = _hermitian_det(V)
        return IndicatorResult(det, V, det < 0, 0.0)
    mats = [_indicator_matrix(p_eff, m_eff, eps / 2**k) for k in range(n_richardson)]
    # eps -> 0 extrapolation assuming an expansion in powers of eps
    table = [np.asarray(x) for x in mats]
    for order in range(1, n_richardson):
        table = [(2**order * table[k + 1] - table[k]) / (2**order - 1) for k in range(len(table) - 1)]
    V = table[0]
    V = 0.5 * (V + V.conj().T)
    det = _hermitian_det(V)
    return IndicatorResult(det, V, det < 0, eps, {"raw": mats})


def conditional_state_test(p: OscillatorParams, model: NoiseModel, eps: float | None = None):
    """Heisenberg test on the oscillator driven by force noise alone,
    conditioned on its noisy position record.

    Returns (violated, lam) where lam is the 2x2 conditional moment
    matrix and violated means lam11 lam22 - |lam12 - i|^2 < 0, i.e.
    lam11 lam22 - lam12^2 < 1 for real lam12.
    """
    if p.gamma_m <= 0:
        raise ValueError("no stationary state: gamma_m must be positive")
    p, model = apply_passive_loss(p, model)
    if eps is None:
        eps = 0.0 if _has_floor(model) else 1e-6 * 2.0 / p.omega_m
    lams = [_conditional_moments(p, model, eps / 2**k) for k in range(3 if eps else 1)]
    for order in range(1, len(lams)):
        lams = [(2**order * lams[k + 1] - lams[k]) / (2**order - 1) for k in range(len(lams) - 1)]
    lam = 0.5 * (lams[0] + lams[0].conj().T)
    det = lam[0, 0].real * lam[1, 1].real - abs(lam[0, 1] - 1j) ** 2
    return bool(det < 0), lam


def _conditional_moments(p: OscillatorParams, model: NoiseModel, eps: float) -> np.ndarray:
    """lam_ij = <c_i c_j> - int X_i M^-1 X_j^* over the record w2(t), t < 0.

    c is the force-driven oscillator (c1 = omega_m chi n_F,
    c2 = dc1/dt / omega_m).  X_j(t) = <c_j(0) w2(-t)> for t > 0 is the
    non-symmetrized correlation with the record, built here from the
    cross spectrum of c_j with c1 and the commutator fixed by causality.
    """
    wm, wq = p.omega_m, p.omega_q
    chi = susceptibility(p)
    force = model.force()
    dt_op = Rational.zpk([0.0], [], -1j / wm)
    if force.is_zero():
        c_spec = Rational()
    else:
        c_spec = chi * chi.conj() * force.to_rational() * wm**2
    # S_{c_j c_1}(w); c2 carries an extra -i w / omega_m on its own side
    cross = [c_spec, dt_op * c_spec]
    moments = np.zeros((2, 2))
    if c_spec:
        moments[0, 0] = real_line_integral(c_spec).real
        moments[1, 1] = real_line_integral(dt_op * dt_op.conj() * c_spec).real
    # <c_j(0) c1(s)> = int dw/2pi S_{c_j c1}(w) exp(i w s); on s = -t this is
    # the inverse transform at time t, so the causal part in t is [S]_+
    xs = []
    commut = [chi * (-1j * np.sqrt(wm) * wq), causal_derivative(chi) * (-1j * wq / np.sqrt(wm))]
    for j in range(2):
        sym = causal_project(cross[j]) * (wq / np.sqrt(wm)) if cross[j] else Rational()
        # [c_j(0), w2(-t)] / 2 = -i sqrt(omega_m) O_q chi(t) (times d/dt / omega_m for j = 2)
        xs.append(sym + commut[j])
    m = _record_kernel(p, model, eps)
    factors = spectral_factorize(m.reflect())
    # h_j solves the half-line equation with right-hand side conj(X_j(t))
    hs = [wiener_hopf_solve(factors, x.conj_reflect()) for x in xs]
    lam = np.zeros((2, 2), dtype=complex)
    for i in range(2):
        xi = xs[i].reflect()
        for j in range(2):
            lam[i, j] = moments[i, j] - real_line_integral(xi * hs[j])
    return lam


# ----------------------------------------------------------------------
# closed forms and threshold search
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class WhiteThreshold:
    omega_s_star: float
    ratio: float
    entangled: bool


def closed_form_white_threshold(w: WhiteNoiseParams, p: OscillatorParams) -> WhiteThreshold:
    """Free-mass threshold Omega_S* = sqrt(Omega_F^2 + (1 - eta) Omega_q^2 / 2)."""
    slow = max(p.omega_m, p.gamma_m)
    if w.omega_f < 10 * slow or w.omega_s < 10 * slow:
        warnings.warn("outside the free-mass regime; the closed form is approximate", stacklevel=2)
    star = float(np.sqrt(w.omega_f**2 + (1 - p.eta) * p.omega_q**2 / 2))
    ratio = star / w.omega_f if w.omega_f > 0 else float("inf")
    return WhiteThreshold(star, ratio, w.omega_s > star)


@dataclass
class NoSensingResult:
    entangled: bool
    value: float
    bound: float
    omega_star: complex
    high_q_value: float
    high_q_entangled: bool
    overdamped: bool

    def __bool__(self):
        return self.entangled


def mechanical_pole(p: OscillatorParams) -> tuple[complex, bool]:
    disc = p.omega_m**2 - p.gamma_m**2 / 4
    if disc >= 0:
        return complex(-0.5j * p.gamma_m + np.sqrt(disc)), False
    poles = p.mech_poles()
    return complex(poles[np.argmax(np.abs(poles.imag))]), True


def no_sensing_criterion(p: OscillatorParams, force_factors, force_spectrum: RationalSpectrum | None = None) -> NoSensingResult:
    """|S_nF-(Omega*)|^2 > gamma_m at the mechanical pole Omega*."""
    star, overdamped = mechanical_pole(p)
    val = float(abs(force_factors.minus(np.array([star]))[0]) ** 2)
    if force_spectrum is not None:
        hq = float(force_spectrum(p.omega_m))
    else:
        hq = float(np.real(force_factors(np.array([p.omega_m]))[0]))
    return NoSensingResult(val > p.gamma_m, val, p.gamma_m, star, hq, hq >= 2 * p.gamma_m, overdamped)


@dataclass
class ThresholdResult:
    value: float
    method: str
    n_evals: int
    bracket: tuple


def find_threshold(
    family: Callable[[float], tuple],
    bracket: tuple,
    method: str = "indicator",
    grid: ModeGrid | Callable | None = None,
    sq=None,
    partition: str = "output",
    rtol: float = 1e-3,
) -> ThresholdResult:
    """Locate the entangling transition along a one-parameter family.

    ``family(x)`` returns (OscillatorParams, NoiseModel).  Brent's method
    runs on log(x); the sign change is in det (indicator) or in
    min_sympl_eig - 1 (negativity).
    """
    lo, hi = bracket
    if not 0 < lo < hi:
        raise ValueError("bracket must satisfy 0 < lo < hi")
    count = [0]

    def f(logx):
        x = float(np.exp(logx))
        count[0] += 1
        p, model = family(x)
        if method == "indicator":
            r = indicator(p, model, sq)
            return r.det_value / max(abs(r.matrix_2x2[0, 0] * r.matrix_2x2[1, 1]), 1e-300)
        if method == "negativity":
            g = grid(x) if callable(grid) else grid
            return negativity_for(p, model, g, sq, partition).min_sympl_eig - 1.0
        raise ValueError(f"unknown method {method!r}")

    a, b = np.log(lo), np.log(hi)
    fa, fb = f(a), f(b)
    if np.sign(fa) == np.sign(fb):
        raise NoTransitionError(f"no transition in range [{lo:.4g}, {hi:.4g}]")
    root = brentq(lambda x: f(x), a, b, xtol=rtol / 4, rtol=4 * np.finfo(float).eps)
    return ThresholdResult(float(np.exp(root)), method, count[0], (lo, hi))


@dataclass
class MonotonicityReport:
    ok: bool
    entangled: list
    min_eigs: list
    violations: list


def fd_monotonicity_check(p: OscillatorParams, model: NoiseModel, sq, omega_q_list, grid: ModeGrid,
                          partition: str = "output", slack: float = 1e-9) -> MonotonicityReport:
    """Once entangled at some Omega_q, the state stays entangled for larger
    Omega_q; the smallest PT symplectic eigenvalue must not increase."""
    qs = list(omega_q_list)
    if any(b <= a for a, b in zip(qs, qs[1:])):
        raise ValueError("omega_q_list must be increasing")
    ent, mins, bad = [], [], []
    for q in qs:
        r = negativity_for(p.with_(omega_q=q), model, grid, sq, partition)
        ent.append(r.entangled)
        mins.append(r.min_sympl_eig)
    for k in range(1, len(qs)):
        if ent[k - 1] and not ent[k]:
            bad.append((qs[k - 1], qs[k], "entanglement lost"))
        if ent[k - 1] and mins[k] > mins[k - 1] + slack:
            bad.append((qs[k - 1], qs[k], "smallest eigenvalue increased"))
    return MonotonicityReport(not bad, ent, mins, bad)
