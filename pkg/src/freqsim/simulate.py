"""Path simulation front end.

Wraps the kernels in `_kernels` with model packing, output buffers, and
plain-python result types.  Three processes are covered:

* the frequency process on [0, 1] at fixed population size z, driven by the
  closed drift/diffusion coefficients plus raw thinned reproduction and
  immigration events,
* the two-type population process itself (sizes, not frequencies), stopped
  when the total size leaves a band (eps, cap), and
* the culling chain: at epoch rate n the population restarts from total size
  exactly z at the current frequency, runs for 1/n, and the frequency is
  read off at the end of the excursion.  A band exit inside an excursion
  absorbs the chain.

Every path owns a counter-based stream keyed by (seed, stream id); ensembles
use stream ids region*STREAM_REGION + path index so results are independent
of scheduling and identical across the compiled and fallback kernel builds.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from ._kernels import MAX_SEED, STREAM_REGION
from .measures import JumpMeasure, cumulative_fractions, mean_component, pushforward, sc_coefficient
from .model import ModelParams, validate_params

EVENT_NAMES = {
    1: "jump-mu1",
    2: "jump-mu2",
    3: "jump-nu",
    4: "clamp",
    5: "stop-tau",
    6: "cull-restart",
}


def _check_seed(seed: int) -> int:
    seed = int(seed)
    if not 0 <= seed <= MAX_SEED:
        raise ValueError(f"seed must be in [0, {MAX_SEED}], got {seed}")
    return seed


def _check_params(params: ModelParams) -> None:
    problems = validate_params(params)
    if problems:
        raise ValueError("invalid model parameters: " + "; ".join(problems))


def _impl(impl):
    return _kernels.IMPL if impl is None else impl


def _coeff_array(poly) -> np.ndarray:
    return np.asarray(poly.coeffs, dtype=np.float64)


def _steps_for(horizon: float, dt: float) -> tuple[int, float]:
    # snap dt so that an integer number of steps lands exactly on the horizon
    if not (horizon > 0.0 and math.isfinite(horizon)):
        raise ValueError(f"horizon must be positive and finite, got {horizon}")
    if not (0.0 < dt <= horizon):
        raise ValueError(f"dt must lie in (0, horizon], got {dt}")
    n_steps = max(1, int(round(horizon / dt)))
    return n_steps, horizon / n_steps


def _pushed_block(measure: JumpMeasure, z: float, rate: float):
    pushed = pushforward(measure, z)
    u1 = np.array([a.u1 for a in pushed], dtype=np.float64)
    u2 = np.array([a.u2 for a in pushed], dtype=np.float64)
    cum = np.asarray(cumulative_fractions(measure), dtype=np.float64)
    return u1, u2, cum, float(rate)


def pack_frequency_model(params: ModelParams, z: float) -> tuple:
    """Flatten a model into the argument block of the frequency kernels."""
    _check_params(params)
    if not (z > 0.0 and math.isfinite(z)):
        raise ValueError(f"z must be positive and finite, got {z}")
    j11 = sum(a.mass * a.u1 for a in pushforward(params.mu1, z))
    j22 = sum(a.mass * a.u2 for a in pushforward(params.mu2, z))
    return (
        float(z),
        params.c1,
        params.c2,
        params.eta1,
        params.eta2,
        _coeff_array(params.b11),
        _coeff_array(params.b12),
        _coeff_array(params.b21),
        _coeff_array(params.b22),
        sc_coefficient(params.mu1, params.mu2, z),
        float(j11),
        float(j22),
        *_pushed_block(params.nu, z, params.nu.total_mass),
        *_pushed_block(params.mu1, z, z * params.mu1.total_mass),
        *_pushed_block(params.mu2, z, z * params.mu2.total_mass),
    )


def _raw_block(measure: JumpMeasure):
    w1 = np.array([a.w1 for a in measure], dtype=np.float64)
    w2 = np.array([a.w2 for a in measure], dtype=np.float64)
    cum = np.asarray(cumulative_fractions(measure), dtype=np.float64)
    return w1, w2, cum


def pack_population_model(params: ModelParams) -> tuple:
    """Flatten a model into the argument block of the population kernels."""
    _check_params(params)
    w1_1, w1_2, w1_cum = _raw_block(params.mu1)
    w2_1, w2_2, w2_cum = _raw_block(params.mu2)
    wn_1, wn_2, wn_cum = _raw_block(params.nu)
    return (
        params.eta1,
        params.eta2,
        params.c1,
        params.c2,
        _coeff_array(params.b11),
        _coeff_array(params.b12),
        _coeff_array(params.b21),
        _coeff_array(params.b22),
        w1_1,
        w1_2,
        w1_cum,
        params.mu1.total_mass,
        mean_component(params.mu1, 1),
        w2_1,
        w2_2,
        w2_cum,
        params.mu2.total_mass,
        mean_component(params.mu2, 2),
        wn_1,
        wn_2,
        wn_cum,
        params.nu.total_mass,
    )


@dataclass(frozen=True)
class PathConfig:
    """Shared run settings for every path engine.

    Single-trajectory entry points ignore n_paths; ensemble drivers read all
    four fields.  dt is a target step, snapped so that an integer number of
    steps lands exactly on the horizon.
    """

    dt: float
    horizon: float
    seed: int
    n_paths: int = 1

    def __post_init__(self):
        _steps_for(self.horizon, self.dt)  # validates dt and horizon together
        _check_seed(self.seed)
        if not (isinstance(self.n_paths, int) and self.n_paths >= 1):
            raise ValueError(f"n_paths must be a positive integer, got {self.n_paths}")


@dataclass(frozen=True)
class StopBand:
    """Total-size band (eps, cap); leaving it stops a population excursion."""

    eps: float
    cap: float

    def __post_init__(self):
        if not (0.0 <= self.eps < self.cap and math.isfinite(self.cap)):
            raise ValueError(f"need 0 <= eps < cap < inf, got eps={self.eps} cap={self.cap}")


@dataclass
class Trajectory:
    """A recorded path: sample rows plus a time-ordered event list.

    times is strictly increasing and starts at the initial time; values has
    one row per sample (a scalar for frequency paths, a pair for population
    paths).  Each event is (time, kind, payload) where kind is one of the
    EVENT_NAMES strings; every event time also appears in times.
    """

    times: np.ndarray
    values: np.ndarray
    events: list = field(default_factory=list)

    @property
    def terminal(self):
        return self.values[-1]


def _events_list(ev_t, ev_k, ev_p, nev: int) -> list:
    return [(float(ev_t[i]), EVENT_NAMES[int(ev_k[i])], float(ev_p[i])) for i in range(nev)]


@dataclass
class FrequencyEnsemble:
    """Terminal values and path diagnostics for a frequency-process ensemble."""

    r: np.ndarray
    clamp_counts: np.ndarray
    overshoots: np.ndarray
    jump_exits: np.ndarray
    sup2: np.ndarray | None = None

    @property
    def clamp_count(self) -> int:
        return int(self.clamp_counts.sum())

    @property
    def max_overshoot(self) -> float:
        return float(self.overshoots.max()) if len(self.overshoots) else 0.0

    @property
    def jump_exit_count(self) -> int:
        return int(self.jump_exits.sum())


def sample_moment(values: np.ndarray, order: int) -> tuple[float, float]:
    """Monte Carlo mean and standard error of values**order."""
    if order < 0:
        raise ValueError("order must be nonnegative")
    if order == 0:
        return 1.0, 0.0
    v = np.asarray(values, dtype=np.float64) ** order
    n = len(v)
    if n == 0:
        raise ValueError("empty sample")
    se = float(v.std(ddof=1) / math.sqrt(n)) if n > 1 else math.inf
    return float(v.mean()), se


def _value_at(path: Trajectory, t: float) -> float:
    times = path.times
    # horizon snapping can leave the last sample a few ulps short of t
    tol = 1e-9 * max(1.0, abs(t))
    if t < times[0] - tol or t > times[-1] + tol:
        raise ValueError(f"time {t} outside recorded range [{times[0]}, {times[-1]}]")
    idx = int(np.searchsorted(times, t, side="right")) - 1
    idx = min(max(idx, 0), len(times) - 1)
    v = path.values[idx]
    if np.ndim(v) != 0:
        raise ValueError("moment_estimate needs scalar-valued paths")
    return float(v)


def moment_estimate(paths: list, t: float, n: int) -> tuple[float, float]:
    """Mean and standard error of value(t)**n over recorded paths.

    value(t) is the last recorded sample at or before t, so event marks
    between grid points are honoured.
    """
    if not paths:
        raise ValueError("empty sample")
    if not (isinstance(n, int) and n >= 0):
        raise ValueError(f"n must be a nonnegative integer, got {n}")
    if n == 0:
        return 1.0, 0.0
    vals = np.array([_value_at(p, t) for p in paths], dtype=np.float64)
    return sample_moment(vals, n)


def culled_frequency_ensemble(
    params: ModelParams,
    z: float,
    r0: float,
    *,
    horizon: float,
    dt: float,
    n_paths: int,
    seed: int,
    region: int = 0,
    ref: np.ndarray | None = None,
    impl=None,
) -> FrequencyEnsemble:
    """Terminal frequency values for n_paths independent paths.

    When ref is given (a path on the same grid, length n_steps + 1) each
    path also tracks sup over grid times of |R - ref|^2.
    """
    seed = _check_seed(seed)
    if not 0.0 <= r0 <= 1.0:
        raise ValueError(f"r0 must be in [0, 1], got {r0}")
    n_steps, dt_eff = _steps_for(horizon, dt)
    margs = pack_frequency_model(params, z)
    if ref is None:
        ref_arr = np.zeros(0, dtype=np.float64)
    else:
        ref_arr = np.ascontiguousarray(ref, dtype=np.float64)
        if ref_arr.shape != (n_steps + 1,):
            raise ValueError(f"ref must have shape ({n_steps + 1},), got {ref_arr.shape}")
    out_r = np.empty(n_paths, dtype=np.float64)
    out_sup2 = np.empty(n_paths, dtype=np.float64)
    out_cl = np.empty(n_paths, dtype=np.int64)
    out_mo = np.empty(n_paths, dtype=np.float64)
    out_je = np.empty(n_paths, dtype=np.int64)
    k = _impl(impl)
    k.culled_terminal(
        n_paths,
        seed,
        region * STREAM_REGION,
        float(r0),
        dt_eff,
        n_steps,
        *margs,
        ref_arr,
        out_r,
        out_sup2,
        out_cl,
        out_mo,
        out_je,
    )
    return FrequencyEnsemble(
        r=out_r,
        clamp_counts=out_cl,
        overshoots=out_mo,
        jump_exits=out_je,
        sup2=out_sup2 if ref is not None else None,
    )


def _culled_record_run(k, margs, r0, dt_eff, n_steps, horizon, seed, stream) -> Trajectory:
    lam = margs[15] + margs[19] + margs[23]  # nu, mu1, mu2 event rates
    ev_cap = int(4 * lam * horizon) + 64
    while True:
        rec_t = np.empty(n_steps + 1 + ev_cap, dtype=np.float64)
        rec_v = np.empty_like(rec_t)
        ev_t = np.empty(ev_cap, dtype=np.float64)
        ev_k = np.empty(ev_cap, dtype=np.int64)
        ev_p = np.empty(ev_cap, dtype=np.float64)
        _r, _sup2, _cl, _mo, _je, nrec, nev, overflow = k.culled_record(
            seed, stream, float(r0), dt_eff, n_steps, *margs, rec_t, rec_v, ev_t, ev_k, ev_p
        )
        if not overflow:
            break
        ev_cap *= 2
    return Trajectory(
        times=rec_t[:nrec].copy(),
        values=rec_v[:nrec].copy(),
        events=_events_list(ev_t, ev_k, ev_p, nev),
    )


def simulate_culled_frequency(
    params: ModelParams,
    z: float,
    r0: float,
    cfg: PathConfig,
    *,
    stream: int = 0,
    impl=None,
) -> Trajectory:
    """One recorded frequency path: grid samples plus jump/clamp events."""
    if not 0.0 <= r0 <= 1.0:
        raise ValueError(f"r0 must be in [0, 1], got {r0}")
    n_steps, dt_eff = _steps_for(cfg.horizon, cfg.dt)
    margs = pack_frequency_model(params, z)
    return _culled_record_run(
        _impl(impl), margs, r0, dt_eff, n_steps, cfg.horizon, cfg.seed, stream
    )


def coupled_pair(
    params: ModelParams,
    z: float,
    r0: float,
    s0: float,
    cfg: PathConfig,
    *,
    stream: int = 0,
    impl=None,
) -> tuple[Trajectory, Trajectory]:
    """Two recorded paths from distinct starts under one noise/event stream.

    The per-step draw layout is state independent (jump clocks run at the
    constant envelope rate, atom picks and thinning variates are always
    consumed, one normal per substep), so replaying the stream with a second
    start yields the coupled partner exactly.
    """
    for v in (r0, s0):
        if not 0.0 <= v <= 1.0:
            raise ValueError(f"initial frequencies must be in [0, 1], got {v}")
    n_steps, dt_eff = _steps_for(cfg.horizon, cfg.dt)
    margs = pack_frequency_model(params, z)
    k = _impl(impl)
    run = lambda v0: _culled_record_run(k, margs, v0, dt_eff, n_steps, cfg.horizon, cfg.seed, stream)
    return run(r0), run(s0)


def coupled_ensemble(
    params: ModelParams,
    z: float,
    r0: float,
    s0: float,
    *,
    horizon: float,
    dt: float,
    n_pairs: int,
    seed: int,
    region: int = 0,
    impl=None,
) -> tuple[np.ndarray, np.ndarray]:
    """Terminal values of pairs driven by one noise/event stream per pair.

    Both members see identical Brownian increments, event times, atoms and
    thinning variates; only the accept decision depends on the member state.
    """
    seed = _check_seed(seed)
    for v in (r0, s0):
        if not 0.0 <= v <= 1.0:
            raise ValueError(f"initial frequencies must be in [0, 1], got {v}")
    n_steps, dt_eff = _steps_for(horizon, dt)
    margs = pack_frequency_model(params, z)
    out_r = np.empty(n_pairs, dtype=np.float64)
    out_s = np.empty(n_pairs, dtype=np.float64)
    k = _impl(impl)
    k.coupled_terminal(
        n_pairs,
        seed,
        region * STREAM_REGION,
        float(r0),
        float(s0),
        dt_eff,
        n_steps,
        *margs,
        out_r,
        out_s,
    )
    return out_r, out_s


@dataclass
class PopulationEnsemble:
    """Terminal states of population excursions (one row per path)."""

    x1: np.ndarray
    x2: np.ndarray
    stop_time: np.ndarray
    stopped: np.ndarray
    clamp_counts: np.ndarray
    overshoots: np.ndarray


def _check_band_start(x10: float, x20: float, band: StopBand) -> None:
    z0 = x10 + x20
    if not (band.eps < z0 <= band.cap):
        raise ValueError(f"initial total size {z0} outside band ({band.eps}, {band.cap}]")


def cbi_ensemble(
    params: ModelParams,
    x10: float,
    x20: float,
    *,
    horizon: float,
    dt: float,
    band: StopBand,
    n_paths: int,
    seed: int,
    region: int = 0,
    impl=None,
) -> PopulationEnsemble:
    """Population excursions from (x10, x20), stopped at the band."""
    seed = _check_seed(seed)
    if x10 < 0.0 or x20 < 0.0:
        raise ValueError("initial sizes must be nonnegative")
    _check_band_start(x10, x20, band)
    cargs = pack_population_model(params)
    out_x1 = np.empty(n_paths, dtype=np.float64)
    out_x2 = np.empty(n_paths, dtype=np.float64)
    out_t = np.empty(n_paths, dtype=np.float64)
    out_stop = np.empty(n_paths, dtype=np.int64)
    out_a = np.empty(n_paths, dtype=np.int64)
    out_b = np.empty(n_paths, dtype=np.int64)
    out_c = np.empty(n_paths, dtype=np.int64)
    out_cl = np.empty(n_paths, dtype=np.int64)
    out_mo = np.empty(n_paths, dtype=np.float64)
    k = _impl(impl)
    k.cbi_terminal(
        n_paths,
        seed,
        region * STREAM_REGION,
        float(x10),
        float(x20),
        float(horizon),
        float(dt),
        band.eps,
        band.cap,
        *cargs,
        out_x1,
        out_x2,
        out_t,
        out_stop,
        out_a,
        out_b,
        out_c,
        out_cl,
        out_mo,
    )
    return PopulationEnsemble(
        x1=out_x1,
        x2=out_x2,
        stop_time=out_t,
        stopped=out_stop.astype(bool),
        clamp_counts=out_cl,
        overshoots=out_mo,
    )


def simulate_cbi(
    params: ModelParams,
    x0: tuple[float, float],
    band: StopBand,
    cfg: PathConfig,
    *,
    stream: int = 0,
    impl=None,
) -> Trajectory:
    """One recorded population path with per-coordinate samples."""
    x10, x20 = (float(v) for v in x0)
    if x10 < 0.0 or x20 < 0.0:
        raise ValueError("initial sizes must be nonnegative")
    _check_band_start(x10, x20, band)
    horizon, dt, seed = cfg.horizon, cfg.dt, cfg.seed
    cargs = pack_population_model(params)
    # a loose event-count guess; grown on overflow
    lam0 = params.nu.total_mass + (x10 + x20) * max(
        params.mu1.total_mass, params.mu2.total_mass, 1.0
    )
    ev_cap = int(8 * lam0 * horizon) + 64
    n_grid = int(math.ceil(horizon / dt)) + 2
    k = _impl(impl)
    while True:
        rec_t = np.empty(n_grid + ev_cap, dtype=np.float64)
        rec_v1 = np.empty_like(rec_t)
        rec_v2 = np.empty_like(rec_t)
        ev_t = np.empty(ev_cap, dtype=np.float64)
        ev_k = np.empty(ev_cap, dtype=np.int64)
        ev_p = np.empty(ev_cap, dtype=np.float64)
        (_x1, _x2, _t, _stopped, _cl, _mo, nrec, nev, overflow) = k.cbi_record(
            seed,
            stream,
            float(x10),
            float(x20),
            float(horizon),
            float(dt),
            band.eps,
            band.cap,
            *cargs,
            rec_t,
            rec_v1,
            rec_v2,
            ev_t,
            ev_k,
            ev_p,
        )
        if not overflow:
            break
        ev_cap *= 2
    values = np.column_stack((rec_v1[:nrec], rec_v2[:nrec]))
    return Trajectory(
        times=rec_t[:nrec].copy(),
        values=values,
        events=_events_list(ev_t, ev_k, ev_p, nev),
    )


@dataclass
class CullingEnsemble:
    """Terminal frequency of the culling chain, one row per path."""

    r: np.ndarray
    absorbed: np.ndarray
    epochs: np.ndarray


def culling_chain_ensemble(
    params: ModelParams,
    z: float,
    r0: float,
    n_rate: float,
    *,
    horizon: float,
    dt: float,
    band: StopBand,
    n_paths: int,
    seed: int,
    region: int = 0,
    impl=None,
) -> CullingEnsemble:
    """Culling chains at epoch rate n_rate, excursion length 1/n_rate."""
    seed = _check_seed(seed)
    if not 0.0 <= r0 <= 1.0:
        raise ValueError(f"r0 must be in [0, 1], got {r0}")
    if not n_rate > 0.0:
        raise ValueError(f"n_rate must be positive, got {n_rate}")
    if not (band.eps < z <= band.cap):
        raise ValueError(f"restart size z={z} outside band ({band.eps}, {band.cap}]")
    cargs = pack_population_model(params)
    out_r = np.empty(n_paths, dtype=np.float64)
    out_abs = np.empty(n_paths, dtype=np.int64)
    out_nep = np.empty(n_paths, dtype=np.int64)
    k = _impl(impl)
    k.culling_terminal(
        n_paths,
        seed,
        region * STREAM_REGION,
        float(r0),
        float(z),
        float(horizon),
        float(n_rate),
        1.0 / float(n_rate),
        float(dt),
        band.eps,
        band.cap,
        *cargs,
        out_r,
        out_abs,
        out_nep,
    )
    return CullingEnsemble(r=out_r, absorbed=out_abs.astype(bool), epochs=out_nep)


def simulate_culling_chain(
    params: ModelParams,
    z: float,
    r0: float,
    n: int,
    band: StopBand,
    cfg: PathConfig,
    *,
    stream: int = 0,
    impl=None,
) -> Trajectory:
    """One recorded culling chain (piecewise constant between epochs)."""
    if not 0.0 <= r0 <= 1.0:
        raise ValueError(f"r0 must be in [0, 1], got {r0}")
    if not (isinstance(n, int) and n >= 1):
        raise ValueError(f"n must be a positive integer, got {n}")
    if not (band.eps < z <= band.cap):
        raise ValueError(f"restart size z={z} outside band ({band.eps}, {band.cap}]")
    n_rate = float(n)
    horizon, dt, seed = cfg.horizon, cfg.dt, cfg.seed
    cargs = pack_population_model(params)
    ev_cap = int(8 * n_rate * horizon) + 64
    k = _impl(impl)
    while True:
        rec_t = np.empty(ev_cap + 2, dtype=np.float64)
        rec_v = np.empty_like(rec_t)
        ev_t = np.empty(ev_cap, dtype=np.float64)
        ev_k = np.empty(ev_cap, dtype=np.int64)
        ev_p = np.empty(ev_cap, dtype=np.float64)
        _r, _absorbed, _nep, nrec, nev, overflow = k.culling_record(
            seed,
            stream,
            float(r0),
            float(z),
            float(horizon),
            float(n_rate),
            1.0 / float(n_rate),
            float(dt),
            band.eps,
            band.cap,
            *cargs,
            rec_t,
            rec_v,
            ev_t,
            ev_k,
            ev_p,
        )
        if not overflow:
            break
        ev_cap *= 2
    return Trajectory(
        times=rec_t[:nrec].copy(),
        values=rec_v[:nrec].copy(),
        events=_events_list(ev_t, ev_k, ev_p, nev),
    )
