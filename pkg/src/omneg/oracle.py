"""Monte Carlo check of the covariance builder.

The Langevin equations are integrated in the time domain with all
quantum inputs replaced by classical Gaussian noise of the same
symmetrized spectrum; that reproduces symmetrized second moments only.
Colored noise is synthesized by running white noise through a
state-space realization of the causal spectral factor.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .covariance import GaussianState, ModeGrid, build_transfer_table, build_covariance, symplectic_form
from .ratfact import SpectralFactors, spectral_factorize
from .spectra import NoiseModel, OscillatorParams

N_CHUNKS = 20


class OracleError(RuntimeError):
    pass


@dataclass(frozen=True)
class SimConfig:
    dt_sim: float
    duration: float
    burn_in: float
    n_trajectories: int = 10_000
    seed: int = 0

    def __post_init__(self):
        if not self.dt_sim > 0 or self.duration <= 0 or self.burn_in < 0:
            raise OracleError("dt_sim and duration must be positive, burn_in non-negative")
        if self.n_trajectories < 2:
            raise OracleError("need at least two trajectories")

    def validate_for(self, p: OscillatorParams, mode_dt: float | None = None):
        if self.burn_in < 10.0 / p.gamma_m:
            raise OracleError(f"burn_in {self.burn_in:.4g} s is below 10 / gamma_m = {10 / p.gamma_m:.4g} s")
        if mode_dt is not None and self.dt_sim > mode_dt / 10:
            raise OracleError("dt_sim must be at most a tenth of the mode width")

    @property
    def n_steps(self) -> int:
        return int(round(self.duration / self.dt_sim))


def _chunk_rng(seed: int, chunk: int) -> np.random.Generator:
    # counter-based stream per (seed, chunk): independent of worker layout
    return np.random.Generator(np.random.Philox(key=[seed & (2**64 - 1), chunk]))


# ----------------------------------------------------------------------
# colored noise
# ----------------------------------------------------------------------


@dataclass
class _StateSpace:
    """h(t) = d delta(t) + sum_k c_k exp(a_k t), t > 0, driven by white noise."""

    d: float
    a: np.ndarray
    c: np.ndarray
    h: float

    def __post_init__(self):
        if np.any(self.a.real >= 0):
            raise OracleError("unstable realization: filter pole outside the lower half-plane")
        h = self.h
        k = self.a.size
        ea = np.exp(self.a * h)
        e = np.where(np.abs(self.a * h) < 1e-8, h, (ea - 1) / np.where(self.a == 0, 1, self.a))

        def integ(s):
            return np.where(np.abs(s * h) < 1e-8, h, (np.exp(s * h) - 1) / np.where(s == 0, 1, s))

        P = integ(self.a[:, None] + self.a[None, :])
        Q = integ(self.a[:, None] + np.conj(self.a)[None, :])
        n = 1 + 2 * k
        cov = np.zeros((n, n))
        cov[0, 0] = h
        cov[0, 1:k + 1] = cov[1:k + 1, 0] = e.real
        cov[0, k + 1:] = cov[k + 1:, 0] = e.imag
        cov[1:k + 1, 1:k + 1] = 0.5 * np.real(P + Q)
        cov[k + 1:, k + 1:] = 0.5 * np.real(Q - P)
        cov[1:k + 1, k + 1:] = 0.5 * np.imag(P - Q)
        cov[k + 1:, 1:k + 1] = cov[1:k + 1, k + 1:].T
        w, V = np.linalg.eigh(0.5 * (cov + cov.T))
        self._root = V * np.sqrt(np.clip(w, 0, None))
        self._decay = ea

    @classmethod
    def from_factor(cls, plus, h):
        pf = plus.partial_fractions()
        if pf.max_order() > 1:
            raise OracleError("repeated poles in the synthesis filter are not supported")
        if pf.poly.size > 1 and np.any(np.abs(pf.poly[1:]) > 1e-12):
            raise OracleError("synthesis filter must be proper")
        d = float(np.real(pf.poly[0])) if pf.poly.size else 0.0
        if np.any(pf.poles.imag >= 0):
            raise OracleError("unstable realization: factor has an upper half-plane pole")
        res = pf.residues()
        # r / (w - p)  <->  -i r exp(-i p t) H(t)
        return cls(d, -1j * pf.poles, -1j * res, h)

    def init(self, n, rng):
        """Draw the state from its stationary distribution."""
        k = self.a.size
        if k == 0:
            return np.zeros((0, n), dtype=complex)
        P = -1.0 / (self.a[:, None] + self.a[None, :])
        Q = -1.0 / (self.a[:, None] + np.conj(self.a)[None, :])
        cov = np.block([[0.5 * np.real(P + Q), 0.5 * np.imag(P - Q)], [0.5 * np.imag(P - Q).T, 0.5 * np.real(Q - P)]])
        w, V = np.linalg.eigh(0.5 * (cov + cov.T))
        z = (V * np.sqrt(np.clip(w, 0, None))) @ rng.standard_normal((2 * k, n))
        return z[:k] + 1j * z[k:]

    def step(self, x, rng):
        """Advance one step; returns (new state, white increment dW)."""
        k = self.a.size
        z = self._root @ rng.standard_normal((1 + 2 * k, x.shape[1]))
        dw = z[0]
        x = self._decay[:, None] * x + (z[1:k + 1] + 1j * z[k + 1:])
        return x, dw

    def output(self, x):
        return np.real(self.c @ x) if self.a.size else np.zeros(x.shape[1])


def colored_noise_stream(factors: SpectralFactors, cfg: SimConfig, n_samples: int | None = None,
                         n_streams: int = 1, chunk: int = 0) -> np.ndarray:
    """Samples y_n of noise with spectrum plus * minus, step cfg.dt_sim.

    The white part (constant term d of the factor) enters as d dW / h, the
    step average of d times white noise; the rest is the filter state.
    Shape (n_streams, n_samples).
    """
    h = cfg.dt_sim
    n = cfg.n_steps if n_samples is None else n_samples
    ss = _StateSpace.from_factor(factors.plus, h)
    rng = _chunk_rng(cfg.seed, chunk)
    x = ss.init(n_streams, rng)
    out = np.empty((n_streams, n))
    for i in range(n):
        y_state = ss.output(x)
        x, dw = ss.step(x, rng)
        out[:, i] = y_state + ss.d * dw / h
    return out


# ----------------------------------------------------------------------
# Langevin simulation
# ----------------------------------------------------------------------


class _NoiseSource:
    """Per-step increments int n(s) ds of a (possibly colored) noise."""

    def __init__(self, spectrum, h, n, rng):
        self.white = spectrum.is_zero() or spectrum.is_white()
        self.h, self.n, self.rng = h, n, rng
        if self.white:
            self.level = 0.0 if spectrum.is_zero() else float(spectrum.scale * spectrum.num[0] / spectrum.den[0])
        else:
            self.ss = _StateSpace.from_factor(spectral_factorize(spectrum.to_rational()).plus, h)
            self.x = self.ss.init(n, rng)

    def increment(self):
        if self.white:
            if self.level == 0:
                return np.zeros(self.n)
            return np.sqrt(self.level * self.h) * self.rng.standard_normal(self.n)
        y = self.ss.output(self.x)
        self.x, dw = self.ss.step(self.x, self.rng)
        return y * self.h + self.ss.d * dw


def _simulate_chunk(p, model, grid: ModeGrid, cfg: SimConfig, n, chunk):
    rng = _chunk_rng(cfg.seed, chunk)
    h = cfg.dt_sim
    wm, g, wq = p.omega_m, p.gamma_m, p.omega_q
    stiff = max(wm, g, wq**2 / wm)
    if h * stiff > 0.2:
        raise OracleError(f"step size too large for the stiff rate {stiff:.4g} rad/s (need dt_sim < {0.2 / stiff:.3g})")
    centers, widths = grid.output_modes()
    if not grid.is_uniform():
        raise OracleError("the oracle supports uniform mode grids only")
    n_rec = int(round(grid.n_modes * grid.dt / h))
    sub = int(round(grid.dt / h))
    if abs(sub * h - grid.dt) > 1e-9 * grid.dt:
        raise OracleError("mode width must be a multiple of dt_sim")
    n_burn = int(np.ceil(cfg.burn_in / h))
    force = _NoiseSource(model.force(), h, n, rng)
    sens = _NoiseSource(model.sensing(), h, n, rng)
    b1 = np.zeros(n)
    b2 = np.zeros(n)
    v1 = np.zeros((grid.n_modes, n))
    v2 = np.zeros((grid.n_modes, n))
    total = n_burn + n_rec
    for i in range(total):
        du1 = np.sqrt(h) * rng.standard_normal(n)
        du2 = np.sqrt(h) * rng.standard_normal(n)
        dF = force.increment()
        dS = sens.increment()
        b1_old = b1
        # semi-implicit step: damping implicit, position update uses new momentum
        b2 = (b2 + h * (-wm * b1) + (wq / np.sqrt(wm)) * du1 + dF) / (1 + g * h)
        b1 = b1 + h * wm * b2
        j = i - n_burn
        if j >= 0:
            mode = grid.n_modes - 1 - j // sub  # mode 0 ends at s = 0
            v1[mode] += du1
            v2[mode] += du2 + (wq / np.sqrt(wm)) * (0.5 * (b1_old + b1) * h + dS)
    v1 /= np.sqrt(grid.dt)
    v2 /= np.sqrt(grid.dt)
    rows = [b1, b2]
    for k in range(grid.n_modes):
        rows += [v1[k], v2[k]]
    return np.array(rows)


@dataclass
class OracleResult:
    sample: GaussianState
    analytic: GaussianState
    stderr: np.ndarray
    z: np.ndarray

    @property
    def max_abs_z(self) -> float:
        return float(np.nanmax(np.abs(self.z)))


def simulate_covariance(p: OscillatorParams, model: NoiseModel, grid: ModeGrid, cfg: SimConfig,
                        analytic: GaussianState | None = None) -> OracleResult:
    """Sample covariance of [b1(0), b2(0), v(mode k)] with jackknife errors.

    Trajectories are split into N_CHUNKS fixed chunks, each with its own
    counter-based random stream.
    """
    if p.gamma_m <= 0:
        raise OracleError("no stationary state: gamma_m must be positive")
    cfg.validate_for(p, grid.dt)
    n_chunks = min(N_CHUNKS, cfg.n_trajectories)
    sizes = np.full(n_chunks, cfg.n_trajectories // n_chunks)
    sizes[: cfg.n_trajectories % n_chunks] += 1
    sums, outers = [], []
    for c, n in enumerate(sizes):
        X = _simulate_chunk(p, model, grid, cfg, int(n), c)
        sums.append(X.sum(axis=1))
        outers.append(X @ X.T)
    sums = np.array(sums)
    outers = np.array(outers)
    N = cfg.n_trajectories

    def cov_from(s, o, n):
        mu = s / n
        return o / n - np.outer(mu, mu)

    full = cov_from(sums.sum(0), outers.sum(0), N)
    # delete-one-chunk jackknife
    reps = np.array([
        cov_from(sums.sum(0) - sums[k], outers.sum(0) - outers[k], N - sizes[k]) for k in range(n_chunks)
    ])
    g = n_chunks
    var = (g - 1) / g * np.sum((reps - reps.mean(0)) ** 2, axis=0)
    se = np.sqrt(var)
    if analytic is None:
        analytic = build_covariance(build_transfer_table(p, model), grid, check_nyquist=False)
    n_modes = 1 + grid.n_modes
    labels = ("osc",) + ("out",) * grid.n_modes
    sample = GaussianState(full, symplectic_form(n_modes), labels)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(se > 0, (full - analytic.cov) / se, np.where(np.abs(full - analytic.cov) < 1e-12, 0.0, np.inf))
    return OracleResult(sample, analytic, se, z)


def default_sim_config(p: OscillatorParams, grid: ModeGrid, n_trajectories=10_000, seed=0, per_mode=50) -> SimConfig:
    """Step 1/(50 max rate) capped at a tenth of the mode width; burn-in 10/gamma_m."""
    rate = max(p.omega_m, p.gamma_m, p.omega_q**2 / p.omega_m)
    sub = max(10, int(np.ceil(grid.dt * per_mode * rate)))
    h = grid.dt / sub
    burn = 10.0 / p.gamma_m
    return SimConfig(h, burn + grid.n_modes * grid.dt, burn, n_trajectories, seed)
