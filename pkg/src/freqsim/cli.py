"""Command-line front end: validated JSON configs in, CSV/JSON artifacts out.

Every run is a pure function of (config, seed): repeated runs write byte
identical files regardless of parallelism level or kernel backend.  Wall
clock time appears only in the stdout report, never in an output file.
"""
import argparse
import csv
import hashlib
import json
import math
import os
import sys
import time
from dataclasses import dataclass

import numpy as np

from .dual import (
    DAGGER,
    PositivityError,
    PositivityViolation,
    build_rates,
    duality_check,
    generator_identity_residual,
)
from .measures import JumpMeasure
from .model import ModelParams, validate_params
from .ode import (
    ModelFamily,
    ScalingFamilyError,
    large_population_experiment,
    linear_case_closed_form,
    logistic_case_closed_form,
    phase_diagram,
)
from .simulate import (
    PathConfig,
    StopBand,
    cbi_ensemble,
    culled_frequency_ensemble,
    culling_chain_ensemble,
    sample_moment,
    simulate_cbi,
    simulate_culled_frequency,
    simulate_culling_chain,
)

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG = 2
EXIT_POSITIVITY = 3
EXIT_SCALING = 4
EXIT_NUMERIC = 5

RESIDUAL_GATE = 1e-9
ZSCORE_GATE = 4.0


class ConfigError(ValueError):
    """Config rejection carrying the offending field path."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


# ---------------------------------------------------------------- validation

def _check_keys(obj, path, known):
    label = path or "config"
    if not isinstance(obj, dict):
        raise ConfigError(label, f"expected an object, got {type(obj).__name__}")
    unknown = sorted(set(obj) - known)
    if unknown:
        where = [f"{path}.{k}" if path else k for k in unknown]
        extra = "" if len(where) == 1 else f" (also: {', '.join(where[1:])})"
        raise ConfigError(where[0], "unknown key" + extra)


def _real(obj, path, lo=None, hi=None, positive=False):
    if isinstance(obj, bool) or not isinstance(obj, (int, float)):
        raise ConfigError(path, f"expected a number, got {obj!r}")
    v = float(obj)
    if not math.isfinite(v):
        raise ConfigError(path, f"must be finite, got {obj!r}")
    if positive and not v > 0.0:
        raise ConfigError(path, f"must be > 0, got {obj!r}")
    if lo is not None and v < lo:
        raise ConfigError(path, f"must be >= {lo}, got {obj!r}")
    if hi is not None and v > hi:
        raise ConfigError(path, f"must be <= {hi}, got {obj!r}")
    return v


def _integer(obj, path, lo=None):
    if isinstance(obj, bool) or not isinstance(obj, int):
        raise ConfigError(path, f"expected an integer, got {obj!r}")
    if lo is not None and obj < lo:
        raise ConfigError(path, f"must be >= {lo}, got {obj}")
    return obj


def _choice(obj, path, choices):
    if obj not in choices:
        raise ConfigError(path, f"expected one of {sorted(choices)}, got {obj!r}")
    return obj


def _coeffs(obj, path):
    if not isinstance(obj, list) or not obj:
        raise ConfigError(path, "expected a coefficient array [a0, a1, ...]")
    return tuple(_real(c, f"{path}[{i}]") for i, c in enumerate(obj))


def _measure(obj, path):
    if not isinstance(obj, list):
        raise ConfigError(path, "expected an array of [w1, w2, mass] triples")
    atoms = []
    for i, triple in enumerate(obj):
        if not isinstance(triple, list) or len(triple) != 3:
            raise ConfigError(f"{path}[{i}]", "expected [w1, w2, mass]")
        atoms.append(tuple(_real(v, f"{path}[{i}][{j}]") for j, v in enumerate(triple)))
    try:
        return JumpMeasure(atoms)
    except ValueError as exc:
        raise ConfigError(path, str(exc)) from None


_MODEL_KEYS = {"c1", "c2", "eta1", "eta2", "b11", "b12", "b21", "b22", "mu1", "mu2", "nu"}


def _parse_model(obj, path):
    _check_keys(obj, path, _MODEL_KEYS)
    kwargs = {}
    for name in ("c1", "c2", "eta1", "eta2"):
        if name in obj:
            kwargs[name] = _real(obj[name], f"{path}.{name}", lo=0.0)
    for name in ("b11", "b12", "b21", "b22"):
        if name in obj:
            kwargs[name] = _coeffs(obj[name], f"{path}.{name}")
    for name in ("mu1", "mu2", "nu"):
        if name in obj:
            kwargs[name] = _measure(obj[name], f"{path}.{name}")
    try:
        params = ModelParams(**kwargs)
    except ValueError as exc:
        raise ConfigError(path, str(exc)) from None
    problems = validate_params(params)
    if problems:
        raise ConfigError(path, "; ".join(problems))
    return params


_TOP_KEYS = {
    "model", "z", "r0", "target", "x0", "band", "n", "n_list",
    "path", "dual", "ode", "output",
}
_PATH_KEYS = {"dt", "horizon", "seed", "n_paths"}
_DUAL_KEYS = {"n0", "n_max", "t"}
_ODE_KEYS = {"scaling", "z_list", "grid_size"}
_OUTPUT_KEYS = {"dir", "format"}


@dataclass
class RunConfig:
    """One validated run: parsed blocks plus the effective raw document."""

    raw: dict
    config_hash: str
    params: ModelParams | None
    z: float | None
    r0: float | None
    target: str
    x0: tuple | None
    band: StopBand | None
    n: int | None
    n_list: list | None
    path_dt: float | None
    path_horizon: float | None
    path_n_paths: int
    seed: int | None
    dual_n0: int | None
    dual_n_max: int | None
    dual_t: float | None
    ode_scaling: str | None
    ode_z_list: list | None
    ode_grid: int
    outdir: str
    fmt: str
    threads: int

    def path_config(self) -> PathConfig:
        if self.path_dt is None or self.path_horizon is None:
            raise ConfigError("path", "required for this command (dt, horizon)")
        if self.seed is None:
            raise ConfigError("path.seed", "no seed given (path.seed, FREQSIM_SEED, or --seed)")
        try:
            return PathConfig(
                dt=self.path_dt,
                horizon=self.path_horizon,
                seed=self.seed,
                n_paths=self.path_n_paths,
            )
        except ValueError as exc:
            raise ConfigError("path", str(exc)) from None


def _require(value, path):
    if value is None:
        raise ConfigError(path, "required for this command")
    return value


def load_config(source, *, seed=None, out=None, fmt=None, threads=None) -> RunConfig:
    """Read, validate and normalize a run config.

    source is a JSON file path or an already-parsed dict.  --seed beats
    FREQSIM_SEED beats path.seed; --out and --format beat the output block.
    The effective document (after overrides) is what gets hashed and echoed.
    """
    if isinstance(source, dict):
        raw = json.loads(json.dumps(source))  # private copy
    else:
        try:
            with open(source, encoding="utf-8") as fh:
                raw = json.load(fh)
        except OSError as exc:
            raise ConfigError("", f"cannot read config: {exc}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError("", f"invalid JSON: {exc}") from None
    _check_keys(raw, "", _TOP_KEYS)

    params = _parse_model(raw["model"], "model") if "model" in raw else None
    z = _real(raw["z"], "z", positive=True) if "z" in raw else None
    r0 = _real(raw["r0"], "r0", lo=0.0, hi=1.0) if "r0" in raw else None
    target = _choice(raw.get("target", "frequency"), "target",
                     {"frequency", "population", "culling"})

    x0 = None
    if "x0" in raw:
        if not isinstance(raw["x0"], list) or len(raw["x0"]) != 2:
            raise ConfigError("x0", "expected [x1, x2]")
        x0 = tuple(_real(v, f"x0[{i}]", lo=0.0) for i, v in enumerate(raw["x0"]))
    band = None
    if "band" in raw:
        if not isinstance(raw["band"], list) or len(raw["band"]) != 2:
            raise ConfigError("band", "expected [eps, cap]")
        eps = _real(raw["band"][0], "band[0]", lo=0.0)
        cap = _real(raw["band"][1], "band[1]", positive=True)
        try:
            band = StopBand(eps, cap)
        except ValueError as exc:
            raise ConfigError("band", str(exc)) from None
    n = _integer(raw["n"], "n", lo=1) if "n" in raw else None
    n_list = None
    if "n_list" in raw:
        if not isinstance(raw["n_list"], list) or not raw["n_list"]:
            raise ConfigError("n_list", "expected a non-empty array of integers >= 1")
        n_list = [_integer(v, f"n_list[{i}]", lo=1) for i, v in enumerate(raw["n_list"])]

    path_dt = path_horizon = None
    path_n_paths = 1
    cfg_seed = None
    if "path" in raw:
        block = raw["path"]
        _check_keys(block, "path", _PATH_KEYS)
        if "dt" in block:
            path_dt = _real(block["dt"], "path.dt", positive=True)
        if "horizon" in block:
            path_horizon = _real(block["horizon"], "path.horizon", positive=True)
        if "n_paths" in block:
            path_n_paths = _integer(block["n_paths"], "path.n_paths", lo=1)
        if "seed" in block:
            cfg_seed = _integer(block["seed"], "path.seed", lo=0)

    dual_n0 = dual_n_max = dual_t = None
    if "dual" in raw:
        block = raw["dual"]
        _check_keys(block, "dual", _DUAL_KEYS)
        if "n0" in block:
            dual_n0 = _integer(block["n0"], "dual.n0", lo=0)
        if "n_max" in block:
            dual_n_max = _integer(block["n_max"], "dual.n_max", lo=1)
        if "t" in block:
            dual_t = _real(block["t"], "dual.t", positive=True)

    ode_scaling = ode_z_list = None
    ode_grid = 201
    if "ode" in raw:
        block = raw["ode"]
        _check_keys(block, "ode", _ODE_KEYS)
        if "scaling" in block:
            ode_scaling = _choice(block["scaling"], "ode.scaling",
                                  {"linear", "per-z-linear", "logistic"})
        if "z_list" in block:
            if not isinstance(block["z_list"], list) or not block["z_list"]:
                raise ConfigError("ode.z_list", "expected a non-empty array of positive reals")
            ode_z_list = [
                _real(v, f"ode.z_list[{i}]", positive=True)
                for i, v in enumerate(block["z_list"])
            ]
        if "grid_size" in block:
            ode_grid = _integer(block["grid_size"], "ode.grid_size", lo=2)

    outdir = "."
    file_fmt = "csv"
    if "output" in raw:
        block = raw["output"]
        _check_keys(block, "output", _OUTPUT_KEYS)
        if "dir" in block:
            if not isinstance(block["dir"], str) or not block["dir"]:
                raise ConfigError("output.dir", "expected a non-empty string")
            outdir = block["dir"]
        if "format" in block:
            file_fmt = _choice(block["format"], "output.format", {"csv", "json"})

    resolved = seed
    if resolved is None:
        env = os.environ.get("FREQSIM_SEED")
        if env is not None:
            try:
                resolved = int(env)
            except ValueError:
                raise ConfigError("FREQSIM_SEED", f"expected an integer, got {env!r}") from None
    if resolved is None:
        resolved = cfg_seed
    if resolved is not None and not 0 <= resolved < 2 ** 63:
        raise ConfigError("path.seed", f"must be in [0, 2^63), got {resolved}")

    if out is not None:
        outdir = out
    if fmt is not None:
        file_fmt = _choice(fmt, "--format", {"csv", "json"})
    if threads is None:
        threads = os.cpu_count() or 1
    elif threads < 1:
        raise ConfigError("--threads", f"must be >= 1, got {threads}")

    # fold overrides back so the echoed config re-validates to the same hash
    if resolved is not None and "path" in raw:
        raw["path"]["seed"] = resolved
    if "output" in raw or out is not None or fmt is not None:
        raw.setdefault("output", {})
        raw["output"]["dir"] = outdir
        raw["output"]["format"] = file_fmt
    canonical = json.dumps(raw, sort_keys=True, separators=(",", ":"))
    digest = hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    return RunConfig(
        raw=raw,
        config_hash=digest,
        params=params,
        z=z,
        r0=r0,
        target=target,
        x0=x0,
        band=band,
        n=n,
        n_list=n_list,
        path_dt=path_dt,
        path_horizon=path_horizon,
        path_n_paths=path_n_paths,
        seed=resolved,
        dual_n0=dual_n0,
        dual_n_max=dual_n_max,
        dual_t=dual_t,
        ode_scaling=ode_scaling,
        ode_z_list=ode_z_list,
        ode_grid=ode_grid,
        outdir=outdir,
        fmt=file_fmt,
        threads=threads,
    )


# ------------------------------------------------------------------ emission

@dataclass
class RunReport:
    """What a run did: inputs by hash, artifacts by path, anomalies by line."""

    command: str
    config_hash: str
    seed: int | None
    wall_clock_s: float
    outputs: list
    warnings: list
    config: dict
    exit_code: int = 0

    def to_dict(self) -> dict:
        return {
            "command": self.command,
            "config_hash": self.config_hash,
            "seed": self.seed,
            "wall_clock_s": self.wall_clock_s,
            "outputs": self.outputs,
            "warnings": self.warnings,
            "config": self.config,
        }


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _jcell(v):
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return float(v)
    return str(v)


def _write_table(outdir, name, fmt, header, rows) -> str:
    """One tabular artifact; CSV is RFC-4180 (CRLF, header row, '.' decimal)."""
    if fmt == "csv":
        path = os.path.join(outdir, name + ".csv")
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for row in rows:
                writer.writerow([_cell(v) for v in row])
    else:
        path = os.path.join(outdir, name + ".json")
        payload = [dict(zip(header, (_jcell(v) for v in row))) for row in rows]
        _write_json(path, payload)
    return path


def _write_json(path, payload):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def _write_text(path, lines):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def _finish(command, cfg, t0, outputs, warnings, exit_code=0) -> RunReport:
    return RunReport(
        command=command,
        config_hash=cfg.config_hash,
        seed=cfg.seed,
        wall_clock_s=time.perf_counter() - t0,
        outputs=outputs,
        warnings=warnings,
        config=cfg.raw,
        exit_code=exit_code,
    )


def _outdir(cfg) -> str:
    os.makedirs(cfg.outdir, exist_ok=True)
    return cfg.outdir


def _pmap(fn, items, threads):
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    from concurrent.futures import ThreadPoolExecutor

    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


# ------------------------------------------------------------------ commands

def cmd_simulate(cfg: RunConfig) -> RunReport:
    """Path ensemble plus one recorded trajectory for the chosen target."""
    t0 = time.perf_counter()
    params = _require(cfg.params, "model")
    pc = cfg.path_config()
    outdir = _outdir(cfg)
    warnings = []

    if cfg.target == "frequency":
        z = _require(cfg.z, "z")
        r0 = _require(cfg.r0, "r0")
        ens = culled_frequency_ensemble(
            params, z, r0, horizon=pc.horizon, dt=pc.dt, n_paths=pc.n_paths, seed=pc.seed
        )
        traj = simulate_culled_frequency(params, z, r0, pc)
        traj_header = ("time", "value")
        traj_rows = list(zip(traj.times, traj.values))
        path_header = ("path", "terminal", "clamps", "max_overshoot", "jump_exits")
        path_rows = [
            (i, ens.r[i], ens.clamp_counts[i], ens.overshoots[i], ens.jump_exits[i])
            for i in range(pc.n_paths)
        ]
        mean, se = sample_moment(ens.r, 1)
        m2, se2 = sample_moment(ens.r, 2)
        summary_header = (
            "n_paths", "mean", "se", "second_moment", "second_se",
            "min", "max", "clamp_count", "max_overshoot", "jump_exit_count",
        )
        summary_row = (
            pc.n_paths, mean, se, m2, se2, ens.r.min(), ens.r.max(),
            ens.clamp_count, ens.max_overshoot, ens.jump_exit_count,
        )
        if ens.clamp_count:
            warnings.append(
                f"{ens.clamp_count} diffusion clamps, max overshoot {ens.max_overshoot!r}"
            )
        if ens.jump_exit_count:
            warnings.append(f"{ens.jump_exit_count} jump-induced exits from [0, 1]")
    elif cfg.target == "population":
        x0 = _require(cfg.x0, "x0")
        band = _require(cfg.band, "band")
        ens = cbi_ensemble(
            params, x0[0], x0[1],
            horizon=pc.horizon, dt=pc.dt, band=band, n_paths=pc.n_paths, seed=pc.seed,
        )
        traj = simulate_cbi(params, x0, band, pc)
        traj_header = ("time", "x1", "x2")
        traj_rows = [(t, v[0], v[1]) for t, v in zip(traj.times, traj.values)]
        path_header = ("path", "x1", "x2", "stop_time", "stopped", "clamps", "max_overshoot")
        path_rows = [
            (i, ens.x1[i], ens.x2[i], ens.stop_time[i], int(ens.stopped[i]),
             ens.clamp_counts[i], ens.overshoots[i])
            for i in range(pc.n_paths)
        ]
        n_stopped = int(ens.stopped.sum())
        clamp_count = int(ens.clamp_counts.sum())
        max_over = float(ens.overshoots.max()) if pc.n_paths else 0.0
        summary_header = (
            "n_paths", "mean_x1", "mean_x2", "stopped_count", "clamp_count", "max_overshoot",
        )
        summary_row = (
            pc.n_paths, ens.x1.mean(), ens.x2.mean(), n_stopped, clamp_count, max_over,
        )
        if clamp_count:
            warnings.append(f"{clamp_count} diffusion clamps, max overshoot {max_over!r}")
        if n_stopped:
            warnings.append(f"{n_stopped} of {pc.n_paths} paths left the band")
    else:  # culling
        z = _require(cfg.z, "z")
        r0 = _require(cfg.r0, "r0")
        band = _require(cfg.band, "band")
        n = _require(cfg.n, "n")
        ens = culling_chain_ensemble(
            params, z, r0, float(n),
            horizon=pc.horizon, dt=pc.dt, band=band, n_paths=pc.n_paths, seed=pc.seed,
        )
        traj = simulate_culling_chain(params, z, r0, n, band, pc)
        traj_header = ("time", "value")
        traj_rows = list(zip(traj.times, traj.values))
        path_header = ("path", "terminal", "absorbed", "epochs")
        path_rows = [
            (i, ens.r[i], int(ens.absorbed[i]), ens.epochs[i]) for i in range(pc.n_paths)
        ]
        mean, se = sample_moment(ens.r, 1)
        n_abs = int(ens.absorbed.sum())
        summary_header = ("n_paths", "mean", "se", "absorbed_count", "mean_epochs")
        summary_row = (pc.n_paths, mean, se, n_abs, ens.epochs.mean())
        if n_abs:
            warnings.append(f"{n_abs} of {pc.n_paths} chains absorbed on band exit")

    outputs = [
        _write_table(outdir, "trajectory", cfg.fmt, traj_header, traj_rows),
        _write_table(outdir, "events", cfg.fmt, ("time", "kind", "payload"), traj.events),
        _write_table(outdir, "paths", cfg.fmt, path_header, path_rows),
        _write_table(outdir, "summary", cfg.fmt, summary_header, [summary_row]),
    ]
    return _finish("simulate", cfg, t0, outputs, warnings)


def cmd_duality(cfg: RunConfig) -> RunReport:
    """Generator certificate plus the two-sided Monte Carlo moment check."""
    t0 = time.perf_counter()
    params = _require(cfg.params, "model")
    z = _require(cfg.z, "z")
    r0 = _require(cfg.r0, "r0")
    n0 = _require(cfg.dual_n0, "dual.n0")
    n_max = _require(cfg.dual_n_max, "dual.n_max")
    t = _require(cfg.dual_t, "dual.t")
    pc = cfg.path_config()

    rates = build_rates(params, z, n_max)
    if isinstance(rates, PositivityViolation):
        raise PositivityError(rates)
    grid = np.linspace(0.0, 1.0, 21)
    residual = generator_identity_residual(params, z, n_max, grid)
    rep = duality_check(params, z, r0, n0, t, pc.n_paths, pc.seed, dt=pc.dt)

    outdir = _outdir(cfg)
    header = ("n0", "t", "lhs_mean", "lhs_se", "rhs_mean", "rhs_se", "z_score", "residual")
    row = (n0, t, rep.lhs[0], rep.lhs[1], rep.rhs[0], rep.rhs[1], rep.z_score, residual)
    outputs = [_write_table(outdir, "duality", cfg.fmt, header, [row])]

    warnings = []
    code = EXIT_OK
    if residual > RESIDUAL_GATE:
        warnings.append(f"generator identity residual {residual!r} exceeds {RESIDUAL_GATE!r}")
        code = EXIT_CHECK_FAILED
    if rep.z_score > ZSCORE_GATE:
        warnings.append(f"duality z-score {rep.z_score!r} exceeds {ZSCORE_GATE!r}")
        code = EXIT_CHECK_FAILED
    return _finish("duality", cfg, t0, outputs, warnings, exit_code=code)


def cmd_dual_rates(cfg: RunConfig) -> RunReport:
    """Dump the block-counting rate table; the kill column is 'dagger'."""
    t0 = time.perf_counter()
    params = _require(cfg.params, "model")
    z = _require(cfg.z, "z")
    n_max = _require(cfg.dual_n_max, "dual.n_max")
    rates = build_rates(params, z, n_max)
    if isinstance(rates, PositivityViolation):
        raise PositivityError(rates)
    rows = [(n, str(m) if m is DAGGER else m, rate) for n, m, rate in rates.rows()]
    outdir = _outdir(cfg)
    outputs = [_write_table(outdir, "rates", cfg.fmt, ("n", "m", "rate"), rows)]
    return _finish("dual-rates", cfg, t0, outputs, [])


def _closed_form_for(family: ModelFamily, lp):
    if family.scaling == "linear":
        d1 = lp.beta11.coefficient(1) - lp.beta22.coefficient(1)
        d2 = lp.beta12.coefficient(1) + lp.j21
        d3 = lp.beta21.coefficient(1) + lp.j12
        return {"d1": d1, "d2": d2, "d3": d3}, linear_case_closed_form(d1, d2, d3)
    d1 = lp.beta11.coefficient(2) + lp.beta22.coefficient(2)
    d2 = lp.beta22.coefficient(2) - lp.beta11.coefficient(1) + lp.beta22.coefficient(1)
    return {"d1": d1, "d2": d2}, logistic_case_closed_form(d1, d2)


def _equilibrium_lines(tag, report):
    if report.degenerate:
        return [f"{tag}: degenerate (RHS identically zero)"]
    if not report.equilibria:
        return [f"{tag}: no rest point in [0, 1]"]
    return [f"{tag}: r={loc!r} {label}" for loc, label in report.equilibria]


def _equilibrium_payload(report):
    return {
        "degenerate": report.degenerate,
        "case": report.case_label,
        "equilibria": [{"r": float(loc), "stability": label} for loc, label in report.equilibria],
    }


def cmd_ode(cfg: RunConfig) -> RunReport:
    """Limit ODE artifacts: phase samples, equilibria, optional z-convergence."""
    t0 = time.perf_counter()
    params = _require(cfg.params, "model")
    scaling = _require(cfg.ode_scaling, "ode.scaling")
    family = ModelFamily(params, scaling)
    lp = family.limit()
    samples, numeric = phase_diagram(lp, cfg.ode_grid)
    d_values, closed = _closed_form_for(family, lp)

    outdir = _outdir(cfg)
    outputs = [
        _write_table(outdir, "phase", cfg.fmt, ("r", "rhs"), [tuple(s) for s in samples])
    ]
    lines = [f"family: {family.scaling}"]
    lines.append("coefficients: " + " ".join(f"{k}={v!r}" for k, v in d_values.items()))
    if closed.case_label is not None:
        lines.append(f"case: {closed.case_label}")
    lines += _equilibrium_lines("numeric", numeric)
    lines += _equilibrium_lines("closed-form", closed)
    txt_path = os.path.join(outdir, "equilibria.txt")
    _write_text(txt_path, lines)
    outputs.append(txt_path)
    json_path = os.path.join(outdir, "equilibria.json")
    _write_json(json_path, {
        "family": family.scaling,
        "coefficients": d_values,
        "numeric": _equilibrium_payload(numeric),
        "closed_form": _equilibrium_payload(closed),
    })
    outputs.append(json_path)

    warnings = []
    if numeric.degenerate:
        warnings.append("RHS identically zero: every point is a rest point")
    if cfg.ode_z_list:
        r0 = _require(cfg.r0, "r0")
        pc = cfg.path_config()
        rows = large_population_experiment(
            family, r0, pc.horizon, cfg.ode_z_list,
            dt=pc.dt, n_paths=pc.n_paths, seed=pc.seed,
        )
        outputs.append(
            _write_table(outdir, "convergence", cfg.fmt, ("z", "mean_sup2", "se"), rows)
        )
    return _finish("ode", cfg, t0, outputs, warnings)


def cmd_converge_cull(cfg: RunConfig) -> RunReport:
    """Culling-chain moments against the direct frequency process across n."""
    t0 = time.perf_counter()
    params = _require(cfg.params, "model")
    z = _require(cfg.z, "z")
    r0 = _require(cfg.r0, "r0")
    band = _require(cfg.band, "band")
    n_list = _require(cfg.n_list, "n_list")
    pc = cfg.path_config()

    def chain_row(item):
        i, n = item
        ens = culling_chain_ensemble(
            params, z, r0, float(n),
            horizon=pc.horizon, dt=pc.dt, band=band,
            n_paths=pc.n_paths, seed=pc.seed, region=3 + i,
        )
        m1 = sample_moment(ens.r, 1)
        m2 = sample_moment(ens.r, 2)
        return (n, m1[0], m1[1], m2[0], m2[1])

    rows = _pmap(chain_row, list(enumerate(n_list)), cfg.threads)
    ens = culled_frequency_ensemble(
        params, z, r0, horizon=pc.horizon, dt=pc.dt, n_paths=pc.n_paths, seed=pc.seed
    )
    m1 = sample_moment(ens.r, 1)
    m2 = sample_moment(ens.r, 2)
    rows.append(("limit", m1[0], m1[1], m2[0], m2[1]))

    outdir = _outdir(cfg)
    header = ("n", "mean_r", "se_r", "mean_r2", "se_r2")
    outputs = [_write_table(outdir, "cull_convergence", cfg.fmt, header, rows)]
    return _finish("converge-cull", cfg, t0, outputs, [])


def cmd_converge_z(cfg: RunConfig) -> RunReport:
    """Pathwise distance to the limit ODE across population sizes."""
    t0 = time.perf_counter()
    params = _require(cfg.params, "model")
    scaling = _require(cfg.ode_scaling, "ode.scaling")
    z_list = _require(cfg.ode_z_list, "ode.z_list")
    r0 = _require(cfg.r0, "r0")
    pc = cfg.path_config()
    family = ModelFamily(params, scaling)
    rows = large_population_experiment(
        family, r0, pc.horizon, z_list, dt=pc.dt, n_paths=pc.n_paths, seed=pc.seed
    )
    outdir = _outdir(cfg)
    outputs = [_write_table(outdir, "z_convergence", cfg.fmt, ("z", "mean_sup2", "se"), rows)]
    return _finish("converge-z", cfg, t0, outputs, [])


# ------------------------------------------------------------------ dispatch

_COMMANDS = {
    "simulate": cmd_simulate,
    "duality": cmd_duality,
    "dual-rates": cmd_dual_rates,
    "ode": cmd_ode,
    "converge-cull": cmd_converge_cull,
    "converge-z": cmd_converge_z,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="freqsim",
        description="Culled frequency process toolkit: simulation, duality, limit ODE.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "simulate": "run a path ensemble (frequency, population, or culling target)",
        "duality": "generator certificate plus Monte Carlo moment duality check",
        "dual-rates": "dump the block-counting chain rate table",
        "ode": "phase diagram and equilibria of the large-population limit",
        "converge-cull": "culling-chain moments against the direct process",
        "converge-z": "pathwise distance to the limit ODE across z",
    }
    for name, text in helps.items():
        sp = sub.add_parser(name, help=text)
        sp.add_argument("--config", required=True, help="JSON run config")
        sp.add_argument("--seed", type=int, help="overrides FREQSIM_SEED and path.seed")
        sp.add_argument("--threads", type=int, help="worker pool size (default: all cores)")
        sp.add_argument("--out", help="overrides output.dir")
        sp.add_argument("--format", choices=("csv", "json"), help="overrides output.format")
    return parser


def _emit_error(code, message, path=None, violations=None):
    err = {"code": code, "message": message}
    if path:
        err["path"] = path
    if violations is not None:
        err["violations"] = violations
    print(json.dumps({"error": err}), file=sys.stderr)


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = load_config(
            args.config, seed=args.seed, out=args.out, fmt=args.format, threads=args.threads
        )
        report = _COMMANDS[args.command](cfg)
    except ConfigError as exc:
        _emit_error(EXIT_CONFIG, str(exc), path=exc.path)
        return EXIT_CONFIG
    except ScalingFamilyError as exc:
        _emit_error(EXIT_SCALING, str(exc))
        return EXIT_SCALING
    except PositivityError as exc:
        rows = [
            [n, str(m) if m is DAGGER else int(m), float(rate)]
            for n, m, rate in exc.violation.violations
        ]
        _emit_error(EXIT_POSITIVITY, str(exc), violations=rows)
        return EXIT_POSITIVITY
    except ValueError as exc:
        _emit_error(EXIT_CONFIG, str(exc))
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - numeric backstop must not crash raw
        _emit_error(EXIT_NUMERIC, f"{type(exc).__name__}: {exc}")
        return EXIT_NUMERIC
    print(json.dumps(report.to_dict(), indent=2))
    return report.exit_code


def entrypoint():
    sys.exit(main(sys.argv[1:]))


if __name__ == "__main__":
    entrypoint()
