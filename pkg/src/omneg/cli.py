"""Command line front end: config parsing, sweeps, thresholds, figure data.

Frequencies in config files are given in Hz and converted to rad/s here;
everything below this module works in angular units.  Coefficients of
rational spectra are taken as written, in powers of the angular
frequency.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import platform
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import scipy

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from . import __version__
from .covariance import CovarianceError, ModeGrid, discretized_state
from .entangle import (
    EntanglementError,
    NoTransitionError,
    closed_form_white_threshold,
    find_threshold,
    indicator,
    log_negativity,
)
from .oracle import OracleError, default_sim_config, simulate_covariance
from .ratfact import RationalError, spectral_factorize
from .spectra import (
    TWO_PI,
    NoiseModel,
    OscillatorParams,
    RationalSpectrum,
    SpectrumError,
    WhiteNoiseParams,
    white_noise_model,
)
from .squeeze import SqueezeError, SqueezeTransform, filter_cavity_params, fd_squeeze_transform

VERBS = ("sweep", "negativity", "indicator", "threshold", "factorize", "oracle", "fig2", "fig3")
CSV_COLUMNS = ("swept_param", "log_neg", "min_sympl_eig", "indicator_det", "entangled", "sign_agree", "timing")
SWEEP_PARAMS = ("omega_s_hz", "omega_f_hz", "omega_q_hz", "gamma_m_hz", "eta", "force_scale", "sensing_scale")
EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


class ConfigError(ValueError):
    def __init__(self, path: str, msg: str):
        super().__init__(f"{path}: {msg}")
        self.path = path


NUMERIC_ERRORS = (
    RationalError,
    EntanglementError,
    NoTransitionError,
    CovarianceError,
    OracleError,
    np.linalg.LinAlgError,
    FloatingPointError,
)


# ----------------------------------------------------------------------
# presets
# ----------------------------------------------------------------------

PRESETS = {
    # reduced-stiffness profile used by the acceptance suite
    "desk": {
        "oscillator": {"omega_m_hz": 1.0, "gamma_m_hz": 0.2, "omega_q_hz": 4.0, "eta": 1.0},
        "noise": {"type": "white", "omega_f_hz": 4.0, "omega_s_hz": 4.0},
        "numerics": {"n_modes": 900, "dt": 0.0025, "growth": 1.01, "max_width": 0.05, "n_input": 0},
        "sweep": {"param": "omega_s_hz", "range": [2.0, 16.0], "scale": "log", "points": 9},
        "method": "both",
        "partition": "output",
    },
    "fig2": {
        "oscillator": {"omega_m_hz": 1.0, "gamma_m_hz": 0.01, "omega_q_hz": 10.0, "eta": 1.0},
        "noise": {"type": "white", "omega_f_hz": 10.0, "omega_s_hz": 10.0},
        "sweep": {"param": "omega_s_hz", "range": [1.0, 500.0], "scale": "log", "points": 61},
        "method": "indicator",
        "partition": "output",
    },
}
PRESETS["fig3"] = {
    **PRESETS["desk"],
    "squeeze": {"type": "filter_cavity", "r": 1.0},
    "numerics": {"n_modes": 600, "dt": 0.005, "growth": 1.01, "max_width": 0.05, "n_input": 300},
}


# ----------------------------------------------------------------------
# config
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class SweepSpec:
    param: str
    lo: float
    hi: float
    scale: str = "log"
    points: int = 2

    def values(self) -> np.ndarray:
        if self.scale == "log":
            return np.geomspace(self.lo, self.hi, self.points)
        return np.linspace(self.lo, self.hi, self.points)


@dataclass(frozen=True)
class RunConfig:
    oscillator: dict
    noise: dict
    squeeze: dict = field(default_factory=lambda: {"type": "none"})
    numerics: dict | None = None
    sweep: SweepSpec | None = None
    method: str = "indicator"
    partition: str = "output"
    oracle: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict, compare=False)

    def digest(self) -> str:
        blob = json.dumps(self.raw, sort_keys=True, separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()


def _num(d: dict, key: str, path: str, default=None, positive=False, nonneg=False):
    if key not in d:
        if default is None:
            raise ConfigError(f"{path}.{key}", "missing required field")
        return default
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ConfigError(f"{path}.{key}", f"expected a finite number, got {v!r}")
    if positive and not v > 0:
        raise ConfigError(f"{path}.{key}", "must be positive")
    if nonneg and v < 0:
        raise ConfigError(f"{path}.{key}", "must be non-negative")
    return float(v)


def _section(d: dict, key: str, path: str = "") -> dict:
    v = d.get(key, {})
    if not isinstance(v, dict):
        raise ConfigError(f"{path}{key}", "expected a table")
    return v


def load_config_file(path: str | Path) -> dict:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ConfigError(str(path), f"cannot read config ({e.strerror})") from None
    try:
        if path.suffix.lower() == ".json":
            return json.loads(text)
        return tomllib.loads(text)
    except (json.JSONDecodeError, tomllib.TOMLDecodeError) as e:
        raise ConfigError(str(path), f"parse error: {e}") from None


def _merge(base: dict, over: dict) -> dict:
    out = dict(base)
    for k, v in over.items():
        out[k] = _merge(out[k], v) if isinstance(v, dict) and isinstance(out.get(k), dict) else v
    return out


def parse_config(raw: dict) -> RunConfig:
    """Validate a raw config dict; errors carry the offending field path."""
    if not isinstance(raw, dict):
        raise ConfigError("<root>", "expected a table")
    osc = _section(raw, "oscillator")
    for k in ("omega_m_hz", "gamma_m_hz", "omega_q_hz"):
        _num(osc, k, "oscillator", nonneg=True)
    _num(osc, "omega_m_hz", "oscillator", positive=True)
    eta = _num(osc, "eta", "oscillator", default=1.0)
    if not 0 < eta <= 1:
        raise ConfigError("oscillator.eta", "must lie in (0, 1]")

    noise = _section(raw, "noise")
    kind = noise.get("type", "spectra")
    if kind == "white":
        _num(noise, "omega_f_hz", "noise", nonneg=True)
        _num(noise, "omega_s_hz", "noise", positive=True)
    elif kind == "spectra":
        for part in ("force", "sensing"):
            spec = _section(noise, part, "noise.")
            if not spec:
                raise ConfigError(f"noise.{part}", "missing spectrum table")
            try:
                RationalSpectrum.from_config(spec)
            except (KeyError, TypeError) as e:
                raise ConfigError(f"noise.{part}", f"malformed spectrum ({e})") from None
            except SpectrumError as e:
                raise ConfigError(f"noise.{part}", str(e)) from None
        _num(noise, "force_scale", "noise", default=1.0, nonneg=True)
        _num(noise, "sensing_scale", "noise", default=1.0, nonneg=True)
    else:
        raise ConfigError("noise.type", f"unknown noise type {kind!r} (white or spectra)")

    sq = _section(raw, "squeeze") or {"type": "none"}
    if sq.get("type", "none") not in ("none", "constant", "rotation", "filter_cavity"):
        raise ConfigError("squeeze.type", f"unknown squeeze type {sq.get('type')!r}")

    num = _section(raw, "numerics") or None
    if num is not None:
        n = num.get("n_modes")
        if not isinstance(n, int) or n < 1:
            raise ConfigError("numerics.n_modes", "expected a positive integer")
        _num(num, "dt", "numerics", positive=True)
        g = _num(num, "growth", "numerics", default=1.0)
        if g < 1:
            raise ConfigError("numerics.growth", "must be >= 1")
        if not isinstance(num.get("n_input", 0), int) or num.get("n_input", 0) < 0:
            raise ConfigError("numerics.n_input", "expected a non-negative integer")

    sweep = None
    sw = _section(raw, "sweep")
    if sw:
        param = sw.get("param")
        if param not in SWEEP_PARAMS:
            raise ConfigError("sweep.param", f"expected one of {', '.join(SWEEP_PARAMS)}")
        rng = sw.get("range")
        if not (isinstance(rng, list) and len(rng) == 2 and all(isinstance(x, (int, float)) for x in rng)):
            raise ConfigError("sweep.range", "expected [lo, hi]")
        lo, hi = map(float, rng)
        if not 0 < lo < hi:
            raise ConfigError("sweep.range", "range must be positive with lo < hi")
        pts = sw.get("points", 2)
        if not isinstance(pts, int) or pts < 2:
            raise ConfigError("sweep.points", "need at least 2 points")
        scale = sw.get("scale", "log")
        if scale not in ("lin", "log"):
            raise ConfigError("sweep.scale", "expected lin or log")
        sweep = SweepSpec(param, lo, hi, scale, pts)

    method = raw.get("method", "indicator")
    if method not in ("indicator", "negativity", "both"):
        raise ConfigError("method", "expected indicator, negativity or both")
    if method != "indicator" and num is None:
        raise ConfigError("numerics", "the negativity path needs a [numerics] table")
    partition = raw.get("partition", "output")
    if partition not in ("output", "joint"):
        raise ConfigError("partition", "expected output or joint")
    return RunConfig(osc, noise, sq, num, sweep, method, partition, _section(raw, "oracle"), raw)


# ----------------------------------------------------------------------
# building physics objects
# ----------------------------------------------------------------------


def _apply_override(cfg: RunConfig, param: str | None, value: float | None):
    osc, noise = dict(cfg.oscillator), dict(cfg.noise)
    if param is None:
        return osc, noise
    if param in ("omega_q_hz", "gamma_m_hz", "eta"):
        osc[param] = value
    elif param in ("omega_s_hz", "omega_f_hz"):
        if noise.get("type") != "white":
            raise ConfigError("sweep.param", f"{param} requires white noise")
        noise[param] = value
    else:
        if noise.get("type") == "white":
            raise ConfigError("sweep.param", f"{param} requires noise.type = spectra")
        noise[param] = value
    return osc, noise


def build_system(cfg: RunConfig, param: str | None = None, value: float | None = None):
    """(OscillatorParams, NoiseModel, SqueezeTransform) for one sweep point."""
    osc, noise = _apply_override(cfg, param, value)
    try:
        p = OscillatorParams.from_hz(osc["omega_m_hz"], osc["gamma_m_hz"], osc["omega_q_hz"], osc.get("eta", 1.0))
        if noise.get("type") == "white":
            model = white_noise_model(WhiteNoiseParams(TWO_PI * noise["omega_f_hz"], TWO_PI * noise["omega_s_hz"]), p)
        else:
            model = NoiseModel(
                RationalSpectrum.from_config(noise["force"]),
                RationalSpectrum.from_config(noise["sensing"]),
                float(noise.get("force_scale", 1.0)),
                float(noise.get("sensing_scale", 1.0)),
            )
    except SpectrumError as e:
        raise ConfigError(f"sweep.{param}" if param else "oscillator", str(e)) from None
    return p, model, build_squeeze(cfg.squeeze, p)


def build_squeeze(sq: dict, p: OscillatorParams) -> SqueezeTransform:
    kind = sq.get("type", "none")
    try:
        if kind == "none":
            return SqueezeTransform.none()
        if kind == "constant":
            return SqueezeTransform.constant(float(sq.get("r", 0.0)), float(sq.get("theta", 0.0)))
        if kind == "rotation":
            return SqueezeTransform.rotation(float(sq.get("theta", 0.0)))
        if "gamma_c_hz" in sq:
            g, d = TWO_PI * float(sq["gamma_c_hz"]), TWO_PI * float(sq.get("delta_c_hz", 0.0))
        else:
            g, d = filter_cavity_params(p)
        return fd_squeeze_transform(float(sq.get("r", 1.0)), g, d, float(sq.get("pre_rotation", 0.0)))
    except SqueezeError as e:
        raise ConfigError("squeeze", str(e)) from None


def build_grid(num: dict | None) -> ModeGrid | None:
    if num is None:
        return None
    try:
        return ModeGrid(
            int(num["n_modes"]),
            float(num["dt"]),
            float(num.get("growth", 1.0)),
            None if num.get("max_width") is None else float(num["max_width"]),
            int(num.get("n_input", 0)),
            float(num.get("nyquist_factor", 5.0)),
        )
    except CovarianceError as e:
        raise ConfigError("numerics", str(e)) from None


# ----------------------------------------------------------------------
# evaluation
# ----------------------------------------------------------------------


@dataclass
class PointResult:
    swept_param: float
    log_neg: float = float("nan")
    min_sympl_eig: float = float("nan")
    indicator_det: float = float("nan")
    entangled: bool | None = None
    sign_agree: bool | None = None
    timing: float = 0.0

    def row(self) -> list:
        def fmt(x):
            if x is None:
                return ""
            if isinstance(x, bool):
                return "1" if x else "0"
            return repr(float(x))

        return [fmt(self.swept_param), fmt(self.log_neg), fmt(self.min_sympl_eig), fmt(self.indicator_det),
                fmt(self.entangled), fmt(self.sign_agree), f"{self.timing:.3f}"]


def evaluate_point(cfg: RunConfig, value: float | None, method: str | None = None, dump_cov: str | None = None,
                   partition: str | None = None) -> PointResult:
    method = method or cfg.method
    partition = partition or cfg.partition
    param = cfg.sweep.param if cfg.sweep is not None and value is not None else None
    p, model, sq = build_system(cfg, param, value)
    t0 = time.perf_counter()
    res = PointResult(float("nan") if value is None else value)
    ent_ind = ent_neg = None
    if method in ("indicator", "both"):
        if partition == "joint" and sq.is_frequency_dependent():
            raise ConfigError("method", "the indicator does not cover the joint partition with FD squeezing")
        r = indicator(p, model, None if partition == "joint" else sq)
        res.indicator_det, ent_ind = r.det_value, r.entangled
    if method in ("negativity", "both"):
        state = discretized_state(p, model, build_grid(cfg.numerics), sq, partition)
        if dump_cov:
            state.dump(dump_cov)
        n = log_negativity(state)
        res.log_neg, res.min_sympl_eig, ent_neg = n.log_neg, n.min_sympl_eig, n.entangled
    res.entangled = ent_neg if ent_ind is None else ent_ind
    if ent_ind is not None and ent_neg is not None:
        res.sign_agree = ent_ind == ent_neg
    res.timing = time.perf_counter() - t0
    return res


def _dump_name(dump_cov, k, n):
    if not dump_cov or n == 1:
        return dump_cov
    path = Path(dump_cov)
    return str(path.with_name(f"{path.stem}.{k}{path.suffix}"))


def run_sweep(cfg: RunConfig, threads: int = 1, dump_cov: str | None = None, method: str | None = None) -> list:
    values = [None] if cfg.sweep is None else list(cfg.sweep.values())
    jobs = [(v, _dump_name(dump_cov, k, len(values))) for k, v in enumerate(values)]
    if threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            # map preserves submission order
            return list(pool.map(lambda j: evaluate_point(cfg, j[0], method, j[1]), jobs))
    return [evaluate_point(cfg, v, method, d) for v, d in jobs]


def write_csv(path: Path, header, rows):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def write_manifest(out: Path, verb: str, cfg_digest: str, files: dict, seed=None, extra=None):
    """Provenance record.  results_sha256 covers every CSV column except timing."""
    hashes = {}
    for name, path in files.items():
        with open(path, newline="") as f:
            rows = list(csv.reader(f))
        if rows and "timing" in rows[0]:
            k = rows[0].index("timing")
            rows = [r[:k] + r[k + 1:] for r in rows]
        hashes[name] = hashlib.sha256("\n".join(",".join(r) for r in rows).encode()).hexdigest()
    manifest = {
        "verb": verb,
        "config_sha256": cfg_digest,
        "seed": seed,
        "versions": {"omneg": __version__, "python": platform.python_version(), "numpy": np.__version__,
                     "scipy": scipy.__version__},
        "outputs": {k: str(Path(v).name) for k, v in files.items()},
        "results_sha256": hashes,
    }
    if extra:
        manifest.update(extra)
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest


def write_plot_descriptor(out: Path, csv_name: str, x: str, ys: list, title: str, series: str | None = None):
    """Minimal vega-lite spec pointing at the CSV; no rendering here."""
    spec = {
        "$schema": "https://vega.github.io/schema/vega-lite/v5.json",
        "title": title,
        "data": {"url": csv_name, "format": {"type": "csv"}},
        "layer": [
            {"mark": "line", "encoding": {
                "x": {"field": x, "type": "quantitative", "scale": {"type": "log"}},
                "y": {"field": y, "type": "quantitative"},
                **({"color": {"field": series, "type": "nominal"}} if series else {}),
            }} for y in ys
        ],
    }
    (out / (Path(csv_name).stem + ".vl.json")).write_text(json.dumps(spec, indent=2) + "\n")


# ----------------------------------------------------------------------
# verbs
# ----------------------------------------------------------------------


def cmd_sweep(cfg: RunConfig, out: Path, threads=1, dump_cov=None, method=None, name="sweep"):
    results = run_sweep(cfg, threads, dump_cov, method)
    path = out / f"{name}.csv"
    write_csv(path, CSV_COLUMNS, [r.row() for r in results])
    write_manifest(out, name, cfg.digest(), {name: path})
    return results


def cmd_threshold(cfg: RunConfig, out: Path, rtol=1e-3):
    if cfg.sweep is None:
        raise ConfigError("sweep", "threshold search needs a [sweep] table for the parameter and bracket")
    param = cfg.sweep.param
    methods = ["indicator", "negativity"] if cfg.method == "both" else [cfg.method]
    grid = build_grid(cfg.numerics)
    rows = []
    for m in methods:

        def family(x):
            p, model, _ = build_system(cfg, param, x)
            return p, model

        p0, _, sq = build_system(cfg, param, cfg.sweep.lo)
        t0 = time.perf_counter()
        r = find_threshold(family, (cfg.sweep.lo, cfg.sweep.hi), method=m, grid=grid,
                           sq=sq if not sq.kind == "none" else None, partition=cfg.partition, rtol=rtol)
        rows.append([m, param, repr(r.value), str(r.n_evals), f"{time.perf_counter() - t0:.3f}"])
    if cfg.noise.get("type") == "white" and param == "omega_s_hz":
        p, _, _ = build_system(cfg)
        w = WhiteNoiseParams(TWO_PI * cfg.noise["omega_f_hz"], TWO_PI * cfg.noise["omega_s_hz"])
        cf = closed_form_white_threshold(w, p)
        rows.append(["closed_form", param, repr(cf.omega_s_star / TWO_PI), "0", "0.000"])
    path = out / "threshold.csv"
    write_csv(path, ("method", "param", "threshold", "n_evals", "timing"), rows)
    write_manifest(out, "threshold", cfg.digest(), {"threshold": path})
    return rows


def cmd_factorize(cfg: RunConfig, out: Path):
    p, model, _ = build_system(cfg)
    report = {}
    for name, spec in (("force", model.force()), ("sensing", model.sensing())):
        if spec.is_zero():
            report[name] = None
            continue
        f = spectral_factorize(spec.to_rational())
        w = np.linspace(-10, 10, 201) * p.omega_m
        err = float(np.max(np.abs(f(w) - spec(w)) / np.maximum(np.abs(spec(w)), 1e-300)))
        report[name] = {
            "gain": [float(np.real(f.gain)), float(np.imag(f.gain))],
            "plus_zeros": [[float(z.real), float(z.imag)] for z in f.plus_zeros],
            "plus_poles": [[float(z.real), float(z.imag)] for z in f.plus_poles],
            "reconstruction_rel_error": err,
        }
    path = out / "factorize.json"
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    return report


def cmd_oracle(cfg: RunConfig, out: Path):
    p, model, sq = build_system(cfg)
    if sq.kind != "none":
        raise ConfigError("squeeze", "the oracle simulates vacuum input only")
    o = cfg.oracle
    grid = build_grid(cfg.numerics) or ModeGrid(10, 0.1)
    sim = default_sim_config(p, grid, int(o.get("n_trajectories", 10_000)), int(o.get("seed", 0)))
    if "dt_sim" in o:
        sim = replace(sim, dt_sim=float(o["dt_sim"]))
    res = simulate_covariance(p, model, grid, sim)
    labels = []
    for k, lab in enumerate(res.sample.labels):
        q = ("b1", "b2") if lab == "osc" else ("v1", "v2")
        labels += [f"{q[0]}[{k}]", f"{q[1]}[{k}]"]
    rows = []
    n = len(labels)
    for i in range(n):
        for j in range(i, n):
            rows.append([labels[i], labels[j], repr(float(res.sample.cov[i, j])), repr(float(res.analytic.cov[i, j])),
                         repr(float(res.stderr[i, j])), repr(float(res.z[i, j]))])
    path = out / "oracle.csv"
    write_csv(path, ("row", "col", "sampled", "analytic", "stderr", "z"), rows)
    write_manifest(out, "oracle", cfg.digest(), {"oracle": path}, seed=sim.seed,
                   extra={"max_abs_z": res.max_abs_z, "sim": {"dt_sim": sim.dt_sim, "n_trajectories": sim.n_trajectories}})
    return res


def cmd_fig2(out: Path, etas=(1.0, 0.9), omega_q_hz=(10.0, 20.0), points=61, threads=1):
    """Indicator determinant vs Omega_S and thresholds for each (eta, Omega_q)."""
    base = PRESETS["fig2"]
    rows, thr = [], []
    for eta in etas:
        for wq in omega_q_hz:
            raw = _merge(base, {"oscillator": {"eta": eta, "omega_q_hz": wq}, "sweep": {"points": points}})
            cfg = parse_config(raw)
            for r in run_sweep(cfg, threads):
                rows.append([repr(eta), repr(wq)] + r.row())
            p, _, _ = build_system(cfg)
            fam = lambda x, cfg=cfg: build_system(cfg, "omega_s_hz", x)[:2]
            t = find_threshold(fam, (0.2 * base["noise"]["omega_f_hz"], 5 * base["noise"]["omega_f_hz"]), rtol=1e-6)
            cf = closed_form_white_threshold(WhiteNoiseParams(TWO_PI * 10.0, TWO_PI * 10.0), p)
            thr.append([repr(eta), repr(wq), repr(t.value / base["noise"]["omega_f_hz"]), repr(cf.ratio)])
    out.mkdir(parents=True, exist_ok=True)
    write_csv(out / "fig2.csv", ("eta", "omega_q_hz") + CSV_COLUMNS, rows)
    write_csv(out / "fig2_thresholds.csv", ("eta", "omega_q_hz", "indicator_ratio", "closed_form_ratio"), thr)
    write_plot_descriptor(out, "fig2.csv", "swept_param", ["indicator_det"], "indicator vs sensing noise", "omega_q_hz")
    write_manifest(out, "fig2", hashlib.sha256(json.dumps(base, sort_keys=True).encode()).hexdigest(),
                   {"fig2": out / "fig2.csv", "fig2_thresholds": out / "fig2_thresholds.csv"})
    return rows, thr


def cmd_fig3(out: Path, r=1.0, omega_q_hz=(4.0, 8.0), points=9, threads=1, preset="fig3"):
    """E_N vs Omega_S for vacuum/output, FD/output and FD/joint."""
    base = PRESETS[preset]
    rows = []
    families = (("vacuum_output", {"type": "none"}, "output"),
                ("fd_output", {"type": "filter_cavity", "r": r}, "output"),
                ("fd_joint", {"type": "filter_cavity", "r": r}, "joint"))
    for wq in omega_q_hz:
        for label, sq, part in families:
            raw = _merge(base, {"oscillator": {"omega_q_hz": wq}, "sweep": {"points": points},
                                "method": "negativity", "partition": part})
            raw["squeeze"] = sq
            cfg = parse_config(raw)
            for res in run_sweep(cfg, threads):
                rows.append([label, repr(wq)] + res.row())
    out.mkdir(parents=True, exist_ok=True)
    write_csv(out / "fig3.csv", ("family", "omega_q_hz") + CSV_COLUMNS, rows)
    write_plot_descriptor(out, "fig3.csv", "swept_param", ["log_neg"], "log negativity vs sensing noise", "family")
    write_manifest(out, "fig3", hashlib.sha256(json.dumps(base, sort_keys=True).encode()).hexdigest(),
                   {"fig3": out / "fig3.csv"})
    return rows


# ----------------------------------------------------------------------
# entry point
# ----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="omneg", description="Oscillator / output-light entanglement toolkit.")
    ap.add_argument("verb", choices=VERBS)
    ap.add_argument("--config", help="TOML or JSON run configuration")
    ap.add_argument("--preset", choices=sorted(PRESETS), help="start from a named preset (config overrides it)")
    ap.add_argument("--out", default="omneg_out", help="output directory")
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--dump-cov", help="write the covariance matrix (CSV with labelled header)")
    ap.add_argument("--rtol", type=float, default=1e-3, help="relative tolerance of threshold searches")
    ap.add_argument("--points", type=int, help="override the number of sweep points")
    return ap


def _resolve_config(args) -> RunConfig:
    raw = dict(PRESETS[args.preset]) if args.preset else {}
    if args.config:
        raw = _merge(raw, load_config_file(args.config))
    if not raw:
        raise ConfigError("--config", "no configuration given (use --config or --preset)")
    if args.points is not None:
        raw = _merge(raw, {"sweep": {"points": args.points}})
    return parse_config(raw)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    out = Path(args.out)
    try:
        if args.threads < 1:
            raise ConfigError("--threads", "must be at least 1")
        if args.verb == "fig2":
            _, thr = cmd_fig2(out, points=args.points or 61, threads=args.threads)
            for eta, wq, ratio, cf in thr:
                print(f"eta={eta} omega_q={wq} Hz: threshold ratio {float(ratio):.4f} (closed form {float(cf):.4f})")
            return EXIT_OK
        if args.verb == "fig3":
            cmd_fig3(out, points=args.points or 9, threads=args.threads)
            print(f"wrote {out / 'fig3.csv'}")
            return EXIT_OK
        cfg = _resolve_config(args)
        out.mkdir(parents=True, exist_ok=True)
        if args.verb == "sweep":
            cmd_sweep(cfg, out, args.threads, args.dump_cov)
        elif args.verb in ("negativity", "indicator"):
            if args.verb == "negativity" and cfg.numerics is None:
                raise ConfigError("numerics", "the negativity path needs a [numerics] table")
            cmd_sweep(cfg, out, args.threads, args.dump_cov, method=args.verb, name=args.verb)
        elif args.verb == "threshold":
            for row in cmd_threshold(cfg, out, args.rtol):
                print(f"{row[0]}: {row[1]} = {float(row[2]):.6g}")
        elif args.verb == "factorize":
            print(json.dumps(cmd_factorize(cfg, out), indent=2, sort_keys=True))
        elif args.verb == "oracle":
            res = cmd_oracle(cfg, out)
            print(f"max |z| = {res.max_abs_z:.3f}")
        return EXIT_OK
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except NUMERIC_ERRORS as e:
        print(f"numerical failure: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_NUMERIC
