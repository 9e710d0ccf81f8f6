"""Hot path kernels: per-path event-driven Euler schemes and the dual chain.

Two interchangeable builds of the same kernel source:

* a numba build (default when numba imports cleanly), and
* a pure-Python build used when numba is missing or when the environment
  variable FREQSIM_NO_NUMBA is set to a non-empty value other than "0".

Randomness is a splitmix64 stream per path, keyed by (seed, stream id), so
results do not depend on scheduling or on which build runs; the two builds
produce bit-identical output (integer mixing is exact in both, and float
operations go through the same libm calls).  Stream ids are allocated in
disjoint regions of size STREAM_REGION per sub-ensemble of an operation.

Kernel argument conventions: measures arrive as flat arrays (per-atom data
plus cumulative selection fractions), polynomials as coefficient arrays, and
results are written into caller-allocated output arrays, one slot per path.
"""
from __future__ import annotations

import math
import os
from types import SimpleNamespace

import numpy as np

_flag = os.environ.get("FREQSIM_NO_NUMBA", "").strip()
NUMBA_DISABLED = _flag not in ("", "0")

if not NUMBA_DISABLED:
    try:
        import numba

        HAVE_NUMBA = True
    except Exception:  # pragma: no cover - depends on environment
        numba = None
        HAVE_NUMBA = False
else:
    numba = None
    HAVE_NUMBA = False

STREAM_REGION = 1 << 32  # stream-id region size; regions keep sub-ensembles disjoint
MAX_SEED = (1 << 63) - 1  # seeds are kept int64-safe on the way into kernels

_TWO_PI = 6.283185307179586
_TWO_NEG53 = 2.0**-53
_JUMP_EXIT_TOL = 1e-12  # overshoot beyond this counts as a genuine range exit

_MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


# ---------------------------------------------------------------------------
# RNG primitives, one flavor per build.  The python flavor works on plain ints
# with explicit masking; the numba flavor works on uint64.  Same bits out.
# ---------------------------------------------------------------------------

def _py_mix(x: int) -> int:
    x = (x ^ (x >> 30)) * _MIX1 & _MASK64
    x = (x ^ (x >> 27)) * _MIX2 & _MASK64
    return x ^ (x >> 31)


def _py_stream_state(seed: int, sid: int) -> int:
    a = _py_mix((int(seed) + _GAMMA) & _MASK64)
    b = _py_mix((int(sid) + 1) * _GAMMA & _MASK64)
    return _py_mix((a ^ b) & _MASK64)


def _py_next_u01(state: int):
    state = (state + _GAMMA) & _MASK64
    z = _py_mix(state)
    return state, ((z >> 11) + 0.5) * _TWO_NEG53


if HAVE_NUMBA:
    _U_GAMMA = np.uint64(_GAMMA)
    _U_MIX1 = np.uint64(_MIX1)
    _U_MIX2 = np.uint64(_MIX2)
    _S30 = np.uint64(30)
    _S27 = np.uint64(27)
    _S31 = np.uint64(31)
    _S11 = np.uint64(11)
    _U_ONE = np.uint64(1)

    @numba.njit
    def _nb_mix(x):
        x = (x ^ (x >> _S30)) * _U_MIX1
        x = (x ^ (x >> _S27)) * _U_MIX2
        return x ^ (x >> _S31)

    @numba.njit
    def _nb_stream_state(seed, sid):
        a = _nb_mix(np.uint64(seed) + _U_GAMMA)
        b = _nb_mix((np.uint64(sid) + _U_ONE) * _U_GAMMA)
        return _nb_mix(a ^ b)

    @numba.njit
    def _nb_next_u01(state):
        # np.uint64 on entry keeps boxed python-int states exact across the
        # dispatch boundary (int64 + uint64 would promote to float64)
        state = np.uint64(state) + _U_GAMMA
        z = _nb_mix(state)
        return state, (np.float64(z >> _S11) + 0.5) * _TWO_NEG53


# ---------------------------------------------------------------------------
# Kernel source, built once per flavor.
# ---------------------------------------------------------------------------

def _build_impl(use_jit: bool) -> SimpleNamespace:
    if use_jit:
        jit = numba.njit(nogil=True)
        stream_state = _nb_stream_state
        next_u01 = _nb_next_u01
    else:
        def jit(f):
            return f

        stream_state = _py_stream_state
        next_u01 = _py_next_u01

    @jit
    def _normal(state):
        state, a = next_u01(state)
        state, b = next_u01(state)
        return state, math.sqrt(-2.0 * math.log(a)) * math.cos(_TWO_PI * b)

    @jit
    def _exp1(state):
        state, a = next_u01(state)
        return state, -math.log(a)

    @jit
    def _poly_pos(c, x):
        # truncated polynomial: 0 on the nonpositive half line
        if x <= 0.0:
            return 0.0
        acc = 0.0
        for i in range(len(c) - 1, -1, -1):
            acc = acc * x + c[i]
        return acc

    @jit
    def _pick(cum, u):
        i = 0
        last = len(cum) - 1
        while i < last and u >= cum[i]:
            i += 1
        return i

    # -- culled frequency process -------------------------------------------

    @jit
    def _culled_drift(r, z, c1, c2, eta1, eta2, b11, b12, b21, b22, sc, j11, j22):
        # net drift for raw-event simulation: coefficient drift terms plus the
        # removal of the mean of the thinned reproduction event streams (the
        # cross-coordinate compensations cancel against two of those means)
        q = 1.0 - r
        d = (
            _poly_pos(b11, z * r) * q
            - _poly_pos(b22, z * q) * r
            + _poly_pos(b12, z * q) * q
            - _poly_pos(b21, z * r) * r
        ) / z
        d += (2.0 / z) * (c2 - c1) * r * q
        d += sc * r * q
        d += (eta1 * q - eta2 * r) / z
        d += z * r * q * (j22 - j11)
        return d

    @jit
    def _sigma_culled(r, z, c1, c2):
        v = (2.0 / z) * r * (1.0 - r) * (c1 * (1.0 - r) + c2 * r)
        return math.sqrt(v) if v > 0.0 else 0.0

    @jit
    def _cstep(state, r, h, z, c1, c2, eta1, eta2, b11, b12, b21, b22, sc, j11, j22):
        # one Euler substep; returns overshoot magnitude (0.0 when no clamp)
        state, xi = _normal(state)
        d = _culled_drift(r, z, c1, c2, eta1, eta2, b11, b12, b21, b22, sc, j11, j22)
        sg = _sigma_culled(r, z, c1, c2)
        rn = r + d * h + sg * math.sqrt(h) * xi
        over = 0.0
        if rn > 1.0:
            over = rn - 1.0
            rn = 1.0
        elif rn < 0.0:
            over = -rn
            rn = 0.0
        return state, rn, over

    @jit
    def _culled_path(
        seed,
        sid,
        r0,
        dt,
        n_steps,
        z,
        c1,
        c2,
        eta1,
        eta2,
        b11,
        b12,
        b21,
        b22,
        sc,
        j11,
        j22,
        nu_u1,
        nu_u2,
        nu_cum,
        nu_rate,
        m1_u1,
        m1_u2,
        m1_cum,
        m1_rate,
        m2_u1,
        m2_u2,
        m2_cum,
        m2_rate,
        ref,
        rec_t,
        rec_v,
        ev_t,
        ev_k,
        ev_p,
        record,
    ):
        state = stream_state(seed, sid)
        r = r0
        lam = nu_rate + m1_rate + m2_rate
        use_ref = ref.shape[0] > 0
        sup2 = 0.0
        if use_ref:
            d0 = r - ref[0]
            sup2 = d0 * d0
        nrec = 0
        nev = 0
        overflow = False
        if record:
            rec_t[0] = 0.0
            rec_v[0] = r
            nrec = 1
        clampn = 0
        maxover = 0.0
        jexit = 0
        t = 0.0
        tnext = math.inf
        if lam > 0.0:
            state, e = _exp1(state)
            tnext = e / lam
        for k in range(n_steps):
            tend = (k + 1) * dt
            while tnext <= tend:
                h = tnext - t
                if h > 0.0:
                    state, r, over = _cstep(
                        state, r, h, z, c1, c2, eta1, eta2, b11, b12, b21, b22, sc, j11, j22
                    )
                    if over > 0.0:
                        clampn += 1
                        if over > maxover:
                            maxover = over
                        if record:
                            if nev < ev_t.shape[0]:
                                ev_t[nev] = tnext
                                ev_k[nev] = 4
                                ev_p[nev] = over
                                nev += 1
                            else:
                                overflow = True
                t = tnext
                state, us = next_u01(state)
                x = us * lam
                accepted = False
                kind = 0
                u1 = 0.0
                u2 = 0.0
                if x < nu_rate:
                    kind = 3
                    state, ua = next_u01(state)
                    i = _pick(nu_cum, ua)
                    u1 = nu_u1[i]
                    u2 = nu_u2[i]
                    accepted = True
                elif x < nu_rate + m1_rate:
                    kind = 1
                    state, ua = next_u01(state)
                    i = _pick(m1_cum, ua)
                    u1 = m1_u1[i]
                    u2 = m1_u2[i]
                    state, uth = next_u01(state)
                    accepted = uth <= r
                else:
                    kind = 2
                    state, ua = next_u01(state)
                    i = _pick(m2_cum, ua)
                    u1 = m2_u1[i]
                    u2 = m2_u2[i]
                    state, uth = next_u01(state)
                    accepted = uth <= 1.0 - r
                if accepted:
                    rn = r * (1.0 - u2) + (1.0 - r) * u1
                    if rn > 1.0:
                        if rn > 1.0 + _JUMP_EXIT_TOL:
                            jexit += 1
                        rn = 1.0
                    elif rn < 0.0:
                        if rn < -_JUMP_EXIT_TOL:
                            jexit += 1
                        rn = 0.0
                    delta = rn - r
                    r = rn
                    if record:
                        if nrec < rec_t.shape[0] and nev < ev_t.shape[0]:
                            rec_t[nrec] = t
                            rec_v[nrec] = r
                            nrec += 1
                            ev_t[nev] = t
                            ev_k[nev] = kind
                            ev_p[nev] = delta
                            nev += 1
                        else:
                            overflow = True
                state, e = _exp1(state)
                tnext = t + e / lam
            h = tend - t
            if h > 0.0:
                state, r, over = _cstep(
                    state, r, h, z, c1, c2, eta1, eta2, b11, b12, b21, b22, sc, j11, j22
                )
                if over > 0.0:
                    clampn += 1
                    if over > maxover:
                        maxover = over
                    if record:
                        if nev < ev_t.shape[0]:
                            ev_t[nev] = tend
                            ev_k[nev] = 4
                            ev_p[nev] = over
                            nev += 1
                        else:
                            overflow = True
            t = tend
            if use_ref:
                d0 = r - ref[k + 1]
                if d0 * d0 > sup2:
                    sup2 = d0 * d0
            if record:
                if t > rec_t[nrec - 1]:
                    if nrec < rec_t.shape[0]:
                        rec_t[nrec] = t
                        rec_v[nrec] = r
                        nrec += 1
                    else:
                        overflow = True
        return r, sup2, clampn, maxover, jexit, nrec, nev, overflow

    @jit
    def culled_terminal(
        n_paths,
        seed,
        sid0,
        r0,
        dt,
        n_steps,
        z,
        c1,
        c2,
        eta1,
        eta2,
        b11,
        b12,
        b21,
        b22,
        sc,
        j11,
        j22,
        nu_u1,
        nu_u2,
        nu_cum,
        nu_rate,
        m1_u1,
        m1_u2,
        m1_cum,
        m1_rate,
        m2_u1,
        m2_u2,
        m2_cum,
        m2_rate,
        ref,
        out_r,
        out_sup2,
        out_clampn,
        out_maxover,
        out_jexit,
    ):
        nof = np.zeros(0, dtype=np.float64)
        noi = np.zeros(0, dtype=np.int64)
        for i in range(n_paths):
            r, sup2, clampn, maxover, jexit, _, _, _ = _culled_path(
                seed,
                sid0 + i,
                r0,
                dt,
                n_steps,
                z,
                c1,
                c2,
                eta1,
                eta2,
                b11,
                b12,
                b21,
                b22,
                sc,
                j11,
                j22,
                nu_u1,
                nu_u2,
                nu_cum,
                nu_rate,
                m1_u1,
                m1_u2,
                m1_cum,
                m1_rate,
                m2_u1,
                m2_u2,
                m2_cum,
                m2_rate,
                ref,
                nof,
                nof,
                nof,
                noi,
                nof,
                False,
            )
            out_r[i] = r
            out_sup2[i] = sup2
            out_clampn[i] = clampn
            out_maxover[i] = maxover
            out_jexit[i] = jexit

    @jit
    def culled_record(
        seed,
        sid,
        r0,
        dt,
        n_steps,
        z,
        c1,
        c2,
        eta1,
        eta2,
        b11,
        b12,
        b21,
        b22,
        sc,
        j11,
        j22,
        nu_u1,
        nu_u2,
        nu_cum,
        nu_rate,
        m1_u1,
        m1_u2,
        m1_cum,
        m1_rate,
        m2_u1,
        m2_u2,
        m2_cum,
        m2_rate,
        rec_t,
        rec_v,
        ev_t,
        ev_k,
        ev_p,
    ):
        return _culled_path(
            seed,
            sid,
            r0,
            dt,
            n_steps,
            z,
            c1,
            c2,
            eta1,
            eta2,
            b11,
            b12,
            b21,
            b22,
            sc,
            j11,
            j22,
            nu_u1,
            nu_u2,
            nu_cum,
            nu_rate,
            m1_u1,
            m1_u2,
            m1_cum,
            m1_rate,
            m2_u1,
            m2_u2,
            m2_cum,
            m2_rate,
            np.zeros(0, dtype=np.float64),
            rec_t,
            rec_v,
            ev_t,
            ev_k,
            ev_p,
            True,
        )

    @jit
    def coupled_terminal(
        n_pairs,
        seed,
        sid0,
        r0,
        s0,
        dt,
        n_steps,
        z,
        c1,
        c2,
        eta1,
        eta2,
        b11,
        b12,
        b21,
        b22,
        sc,
        j11,
        j22,
        nu_u1,
        nu_u2,
        nu_cum,
        nu_rate,
        m1_u1,
        m1_u2,
        m1_cum,
        m1_rate,
        m2_u1,
        m2_u2,
        m2_cum,
        m2_rate,
        out_r,
        out_s,
    ):
        # two initial conditions driven by one stream: shared Brownian
        # increments, shared event times/atoms/thinning variates
        lam = nu_rate + m1_rate + m2_rate
        for i in range(n_pairs):
            state = stream_state(seed, sid0 + i)
            r = r0
            s = s0
            t = 0.0
            tnext = math.inf
            if lam > 0.0:
                state, e = _exp1(state)
                tnext = e / lam
            for k in range(n_steps):
                tend = (k + 1) * dt
                while tnext <= tend:
                    h = tnext - t
                    if h > 0.0:
                        state, xi = _normal(state)
                        dr = _culled_drift(r, z, c1, c2, eta1, eta2, b11, b12, b21, b22, sc, j11, j22)
                        ds = _culled_drift(s, z, c1, c2, eta1, eta2, b11, b12, b21, b22, sc, j11, j22)
                        sq = math.sqrt(h)
                        r = r + dr * h + _sigma_culled(r, z, c1, c2) * sq * xi
                        s = s + ds * h + _sigma_culled(s, z, c1, c2) * sq * xi
                        r = min(1.0, max(0.0, r))
                        s = min(1.0, max(0.0, s))
                    t = tnext
                    state, us = next_u01(state)
                    x = us * lam
                    if x < nu_rate:
                        state, ua = next_u01(state)
                        i2 = _pick(nu_cum, ua)
                        u1 = nu_u1[i2]
                        u2 = nu_u2[i2]
                        r = min(1.0, max(0.0, r * (1.0 - u2) + (1.0 - r) * u1))
                        s = min(1.0, max(0.0, s * (1.0 - u2) + (1.0 - s) * u1))
                    elif x < nu_rate + m1_rate:
                        state, ua = next_u01(state)
                        i2 = _pick(m1_cum, ua)
                        u1 = m1_u1[i2]
                        u2 = m1_u2[i2]
                        state, uth = next_u01(state)
                        if uth <= r:
                            r = min(1.0, max(0.0, r * (1.0 - u2) + (1.0 - r) * u1))
                        if uth <= s:
                            s = min(1.0, max(0.0, s * (1.0 - u2) + (1.0 - s) * u1))
                    else:
                        state, ua = next_u01(state)
                        i2 = _pick(m2_cum, ua)
                        u1 = m2_u1[i2]
                        u2 = m2_u2[i2]
                        state, uth = next_u01(state)
                        if uth <= 1.0 - r:
                            r = min(1.0, max(0.0, r * (1.0 - u2) + (1.0 - r) * u1))
                        if uth <= 1.0 - s:
                            s = min(1.0, max(0.0, s * (1.0 - u2) + (1.0 - s) * u1))
                    state, e = _exp1(state)
                    tnext = t + e / lam
                h = tend - t
                if h > 0.0:
                    state, xi = _normal(state)
                    dr = _culled_drift(r, z, c1, c2, eta1, eta2, b11, b12, b21, b22, sc, j11, j22)
                    ds = _culled_drift(s, z, c1, c2, eta1, eta2, b11, b12, b21, b22, sc, j11, j22)
                    sq = math.sqrt(h)
                    r = r + dr * h + _sigma_culled(r, z, c1, c2) * sq * xi
                    s = s + ds * h + _sigma_culled(s, z, c1, c2) * sq * xi
                    r = min(1.0, max(0.0, r))
                    s = min(1.0, max(0.0, s))
                t = tend
            out_r[i] = r
            out_s[i] = s

    # -- two-type population process ----------------------------------------

    @jit
    def _cbi_path(
        state,
        x1,
        x2,
        t0,
        duration,
        dt,
        eps,
        cap,
        eta1,
        eta2,
        c1,
        c2,
        b11,
        b12,
        b21,
        b22,
        w1_1,
        w1_2,
        w1_cum,
        mu1_mass,
        mean1,
        w2_1,
        w2_2,
        w2_cum,
        mu2_mass,
        mean2,
        wn_1,
        wn_2,
        wn_cum,
        nu_mass,
        rec_t,
        rec_v1,
        rec_v2,
        ev_t,
        ev_k,
        ev_p,
        rec_state,
        record,
    ):
        # rec_state: (nrec, nev, overflow int64[3]) carried across calls so the
        # culling chain can reuse this routine without recording
        nrec = rec_state[0]
        nev = rec_state[1]
        overflow = rec_state[2] != 0
        if record and nrec == 0:
            rec_t[0] = t0
            rec_v1[0] = x1
            rec_v2[0] = x2
            nrec = 1
        clampn = 0
        maxover = 0.0
        nmu1 = 0
        nmu2 = 0
        nnu = 0
        stopped = False
        t = 0.0
        k = 0
        while t < duration and not stopped:
            tend = (k + 1) * dt
            if tend > duration:
                tend = duration
            k += 1
            # rates frozen at the left endpoint of the step
            lam1 = x1 * mu1_mass
            lam2 = x2 * mu2_mass
            lam = nu_mass + lam1 + lam2
            tnext = math.inf
            if lam > 0.0:
                state, e = _exp1(state)
                tnext = t + e / lam
            while tnext <= tend and not stopped:
                h = tnext - t
                if h > 0.0:
                    state, xi1 = _normal(state)
                    state, xi2 = _normal(state)
                    sq = math.sqrt(h)
                    d1 = eta1 + _poly_pos(b11, x1) + _poly_pos(b12, x2) - x1 * mean1
                    d2 = eta2 + _poly_pos(b22, x2) + _poly_pos(b21, x1) - x2 * mean2
                    g1 = math.sqrt(2.0 * c1 * x1) if x1 > 0.0 else 0.0
                    g2 = math.sqrt(2.0 * c2 * x2) if x2 > 0.0 else 0.0
                    x1 = x1 + d1 * h + g1 * sq * xi1
                    x2 = x2 + d2 * h + g2 * sq * xi2
                    if x1 < 0.0:
                        clampn += 1
                        if -x1 > maxover:
                            maxover = -x1
                        if record and not overflow:
                            if nev < ev_t.shape[0]:
                                ev_t[nev] = t0 + tnext
                                ev_k[nev] = 4
                                ev_p[nev] = -x1
                                nev += 1
                            else:
                                overflow = True
                        x1 = 0.0
                    if x2 < 0.0:
                        clampn += 1
                        if -x2 > maxover:
                            maxover = -x2
                        if record and not overflow:
                            if nev < ev_t.shape[0]:
                                ev_t[nev] = t0 + tnext
                                ev_k[nev] = 4
                                ev_p[nev] = -x2
                                nev += 1
                            else:
                                overflow = True
                        x2 = 0.0
                t = tnext
                zz = x1 + x2
                if zz <= eps or zz > cap:
                    stopped = True
                    if record and not overflow:
                        if nev < ev_t.shape[0] and nrec < rec_t.shape[0]:
                            rec_t[nrec] = t0 + t
                            rec_v1[nrec] = x1
                            rec_v2[nrec] = x2
                            nrec += 1
                            ev_t[nev] = t0 + t
                            ev_k[nev] = 5
                            ev_p[nev] = zz
                            nev += 1
                        else:
                            overflow = True
                    break
                state, us = next_u01(state)
                x = us * lam
                if x < nu_mass:
                    kind = 3
                    state, ua = next_u01(state)
                    i = _pick(wn_cum, ua)
                    j1 = wn_1[i]
                    j2 = wn_2[i]
                    nnu += 1
                elif x < nu_mass + lam1:
                    kind = 1
                    state, ua = next_u01(state)
                    i = _pick(w1_cum, ua)
                    j1 = w1_1[i]
                    j2 = w1_2[i]
                    nmu1 += 1
                else:
                    kind = 2
                    state, ua = next_u01(state)
                    i = _pick(w2_cum, ua)
                    j1 = w2_1[i]
                    j2 = w2_2[i]
                    nmu2 += 1
                x1 += j1
                x2 += j2
                if record and not overflow:
                    if nrec < rec_t.shape[0] and nev < ev_t.shape[0]:
                        rec_t[nrec] = t0 + t
                        rec_v1[nrec] = x1
                        rec_v2[nrec] = x2
                        nrec += 1
                        ev_t[nev] = t0 + t
                        ev_k[nev] = kind
                        ev_p[nev] = j1 + j2
                        nev += 1
                    else:
                        overflow = True
                zz = x1 + x2
                if zz <= eps or zz > cap:
                    stopped = True
                    if record and not overflow:
                        if nev < ev_t.shape[0]:
                            ev_t[nev] = t0 + t
                            ev_k[nev] = 5
                            ev_p[nev] = zz
                            nev += 1
                        else:
                            overflow = True
                    break
                state, e = _exp1(state)
                tnext = t + e / lam
            if stopped:
                break
            h = tend - t
            if h > 0.0:
                state, xi1 = _normal(state)
                state, xi2 = _normal(state)
                sq = math.sqrt(h)
                d1 = eta1 + _poly_pos(b11, x1) + _poly_pos(b12, x2) - x1 * mean1
                d2 = eta2 + _poly_pos(b22, x2) + _poly_pos(b21, x1) - x2 * mean2
                g1 = math.sqrt(2.0 * c1 * x1) if x1 > 0.0 else 0.0
                g2 = math.sqrt(2.0 * c2 * x2) if x2 > 0.0 else 0.0
                x1 = x1 + d1 * h + g1 * sq * xi1
                x2 = x2 + d2 * h + g2 * sq * xi2
                if x1 < 0.0:
                    clampn += 1
                    if -x1 > maxover:
                        maxover = -x1
                    if record and not overflow:
                        if nev < ev_t.shape[0]:
                            ev_t[nev] = t0 + tend
                            ev_k[nev] = 4
                            ev_p[nev] = -x1
                            nev += 1
                        else:
                            overflow = True
                    x1 = 0.0
                if x2 < 0.0:
                    clampn += 1
                    if -x2 > maxover:
                        maxover = -x2
                    if record and not overflow:
                        if nev < ev_t.shape[0]:
                            ev_t[nev] = t0 + tend
                            ev_k[nev] = 4
                            ev_p[nev] = -x2
                            nev += 1
                        else:
                            overflow = True
                    x2 = 0.0
            t = tend
            zz = x1 + x2
            if zz <= eps or zz > cap:
                stopped = True
                if record and not overflow:
                    if nev < ev_t.shape[0] and nrec < rec_t.shape[0]:
                        rec_t[nrec] = t0 + t
                        rec_v1[nrec] = x1
                        rec_v2[nrec] = x2
                        nrec += 1
                        ev_t[nev] = t0 + t
                        ev_k[nev] = 5
                        ev_p[nev] = zz
                        nev += 1
                    else:
                        overflow = True
                break
            if record and not overflow:
                if t0 + t > rec_t[nrec - 1]:
                    if nrec < rec_t.shape[0]:
                        rec_t[nrec] = t0 + t
                        rec_v1[nrec] = x1
                        rec_v2[nrec] = x2
                        nrec += 1
                    else:
                        overflow = True
        rec_state[0] = nrec
        rec_state[1] = nev
        rec_state[2] = 1 if overflow else 0
        return state, x1, x2, t, stopped, nmu1, nmu2, nnu, clampn, maxover

    @jit
    def cbi_terminal(
        n_paths,
        seed,
        sid0,
        x10,
        x20,
        duration,
        dt,
        eps,
        cap,
        eta1,
        eta2,
        c1,
        c2,
        b11,
        b12,
        b21,
        b22,
        w1_1,
        w1_2,
        w1_cum,
        mu1_mass,
        mean1,
        w2_1,
        w2_2,
        w2_cum,
        mu2_mass,
        mean2,
        wn_1,
        wn_2,
        wn_cum,
        nu_mass,
        out_x1,
        out_x2,
        out_t,
        out_stop,
        out_nmu1,
        out_nmu2,
        out_nnu,
        out_clampn,
        out_maxover,
    ):
        rec_state = np.zeros(3, dtype=np.int64)
        nof = np.zeros(0, dtype=np.float64)
        noi = np.zeros(0, dtype=np.int64)
        for i in range(n_paths):
            rec_state[0] = 0
            rec_state[1] = 0
            rec_state[2] = 0
            st = stream_state(seed, sid0 + i)
            st, x1, x2, t, stopped, nmu1, nmu2, nnu, clampn, maxover = _cbi_path(
                st,
                x10,
                x20,
                0.0,
                duration,
                dt,
                eps,
                cap,
                eta1,
                eta2,
                c1,
                c2,
                b11,
                b12,
                b21,
                b22,
                w1_1,
                w1_2,
                w1_cum,
                mu1_mass,
                mean1,
                w2_1,
                w2_2,
                w2_cum,
                mu2_mass,
                mean2,
                wn_1,
                wn_2,
                wn_cum,
                nu_mass,
                nof,
                nof,
                nof,
                nof,
                noi,
                nof,
                rec_state,
                False,
            )
            out_x1[i] = x1
            out_x2[i] = x2
            out_t[i] = t
            out_stop[i] = 1 if stopped else 0
            out_nmu1[i] = nmu1
            out_nmu2[i] = nmu2
            out_nnu[i] = nnu
            out_clampn[i] = clampn
            out_maxover[i] = maxover

    @jit
    def cbi_record(
        seed,
        sid,
        x10,
        x20,
        duration,
        dt,
        eps,
        cap,
        eta1,
        eta2,
        c1,
        c2,
        b11,
        b12,
        b21,
        b22,
        w1_1,
        w1_2,
        w1_cum,
        mu1_mass,
        mean1,
        w2_1,
        w2_2,
        w2_cum,
        mu2_mass,
        mean2,
        wn_1,
        wn_2,
        wn_cum,
        nu_mass,
        rec_t,
        rec_v1,
        rec_v2,
        ev_t,
        ev_k,
        ev_p,
    ):
        rec_state = np.zeros(3, dtype=np.int64)
        st = stream_state(seed, sid)
        st, x1, x2, t, stopped, nmu1, nmu2, nnu, clampn, maxover = _cbi_path(
            st,
            x10,
            x20,
            0.0,
            duration,
            dt,
            eps,
            cap,
            eta1,
            eta2,
            c1,
            c2,
            b11,
            b12,
            b21,
            b22,
            w1_1,
            w1_2,
            w1_cum,
            mu1_mass,
            mean1,
            w2_1,
            w2_2,
            w2_cum,
            mu2_mass,
            mean2,
            wn_1,
            wn_2,
            wn_cum,
            nu_mass,
            rec_t,
            rec_v1,
            rec_v2,
            ev_t,
            ev_k,
            ev_p,
            rec_state,
            True,
        )
        return (
            x1,
            x2,
            t,
            stopped,
            clampn,
            maxover,
            rec_state[0],
            rec_state[1],
            rec_state[2] != 0,
        )

    # -- culling chain -------------------------------------------------------

    @jit
    def _culling_path(
        seed,
        sid,
        r0,
        z,
        horizon,
        rate_n,
        inner_dur,
        dt,
        eps,
        cap,
        eta1,
        eta2,
        c1,
        c2,
        b11,
        b12,
        b21,
        b22,
        w1_1,
        w1_2,
        w1_cum,
        mu1_mass,
        mean1,
        w2_1,
        w2_2,
        w2_cum,
        mu2_mass,
        mean2,
        wn_1,
        wn_2,
        wn_cum,
        nu_mass,
        rec_t,
        rec_v,
        ev_t,
        ev_k,
        ev_p,
        record,
    ):
        state = stream_state(seed, sid)
        r = r0
        t = 0.0
        absorbed = False
        nep = 0
        nrec = 0
        nev = 0
        overflow = False
        if record:
            rec_t[0] = 0.0
            rec_v[0] = r
            nrec = 1
        inner_state = np.zeros(3, dtype=np.int64)
        nof = np.zeros(0, dtype=np.float64)
        noi = np.zeros(0, dtype=np.int64)
        state, e = _exp1(state)
        tnext = e / rate_n
        while tnext <= horizon:
            # each epoch restarts the population at total size exactly z and
            # lets it run for the fixed inner duration, stopped at the band
            inner_state[0] = 0
            inner_state[1] = 0
            inner_state[2] = 0
            state, x1, x2, _tr, stopped, _a, _b, _c, _d, _e = _cbi_path(
                state,
                r * z,
                (1.0 - r) * z,
                0.0,
                inner_dur,
                dt,
                eps,
                cap,
                eta1,
                eta2,
                c1,
                c2,
                b11,
                b12,
                b21,
                b22,
                w1_1,
                w1_2,
                w1_cum,
                mu1_mass,
                mean1,
                w2_1,
                w2_2,
                w2_cum,
                mu2_mass,
                mean2,
                wn_1,
                wn_2,
                wn_cum,
                nu_mass,
                nof,
                nof,
                nof,
                nof,
                noi,
                nof,
                inner_state,
                False,
            )
            zz = x1 + x2
            if zz > 0.0:
                r = x1 / zz
            t = tnext
            nep += 1
            if record:
                if nrec < rec_t.shape[0] and nev < ev_t.shape[0]:
                    rec_t[nrec] = t
                    rec_v[nrec] = r
                    nrec += 1
                    ev_t[nev] = t
                    ev_k[nev] = 6
                    ev_p[nev] = r
                    nev += 1
                else:
                    overflow = True
            if stopped:
                absorbed = True
                if record:
                    if nev < ev_t.shape[0]:
                        ev_t[nev] = t
                        ev_k[nev] = 5
                        ev_p[nev] = zz
                        nev += 1
                    else:
                        overflow = True
                break
            state, e = _exp1(state)
            tnext = t + e / rate_n
        if record and horizon > rec_t[nrec - 1]:
            if nrec < rec_t.shape[0]:
                rec_t[nrec] = horizon
                rec_v[nrec] = r
                nrec += 1
            else:
                overflow = True
        return r, absorbed, nep, nrec, nev, overflow

    @jit
    def culling_terminal(
        n_paths,
        seed,
        sid0,
        r0,
        z,
        horizon,
        rate_n,
        inner_dur,
        dt,
        eps,
        cap,
        eta1,
        eta2,
        c1,
        c2,
        b11,
        b12,
        b21,
        b22,
        w1_1,
        w1_2,
        w1_cum,
        mu1_mass,
        mean1,
        w2_1,
        w2_2,
        w2_cum,
        mu2_mass,
        mean2,
        wn_1,
        wn_2,
        wn_cum,
        nu_mass,
        out_r,
        out_abs,
        out_nep,
    ):
        nof = np.zeros(0, dtype=np.float64)
        noi = np.zeros(0, dtype=np.int64)
        for i in range(n_paths):
            r, absorbed, nep, _, _, _ = _culling_path(
                seed,
                sid0 + i,
                r0,
                z,
                horizon,
                rate_n,
                inner_dur,
                dt,
                eps,
                cap,
                eta1,
                eta2,
                c1,
                c2,
                b11,
                b12,
                b21,
                b22,
                w1_1,
                w1_2,
                w1_cum,
                mu1_mass,
                mean1,
                w2_1,
                w2_2,
                w2_cum,
                mu2_mass,
                mean2,
                wn_1,
                wn_2,
                wn_cum,
                nu_mass,
                nof,
                nof,
                nof,
                noi,
                nof,
                False,
            )
            out_r[i] = r
            out_abs[i] = 1 if absorbed else 0
            out_nep[i] = nep

    @jit
    def culling_record(
        seed,
        sid,
        r0,
        z,
        horizon,
        rate_n,
        inner_dur,
        dt,
        eps,
        cap,
        eta1,
        eta2,
        c1,
        c2,
        b11,
        b12,
        b21,
        b22,
        w1_1,
        w1_2,
        w1_cum,
        mu1_mass,
        mean1,
        w2_1,
        w2_2,
        w2_cum,
        mu2_mass,
        mean2,
        wn_1,
        wn_2,
        wn_cum,
        nu_mass,
        rec_t,
        rec_v,
        ev_t,
        ev_k,
        ev_p,
    ):
        return _culling_path(
            seed,
            sid,
            r0,
            z,
            horizon,
            rate_n,
            inner_dur,
            dt,
            eps,
            cap,
            eta1,
            eta2,
            c1,
            c2,
            b11,
            b12,
            b21,
            b22,
            w1_1,
            w1_2,
            w1_cum,
            mu1_mass,
            mean1,
            w2_1,
            w2_2,
            w2_cum,
            mu2_mass,
            mean2,
            wn_1,
            wn_2,
            wn_cum,
            nu_mass,
            rec_t,
            rec_v,
            ev_t,
            ev_k,
            ev_p,
            True,
        )

    # -- dual block counting chain ------------------------------------------

    @jit
    def dual_terminal(n_paths, seed, sid0, n0, horizon, q, kill, tot, out_state, out_tlast, out_over):
        nrows = q.shape[0]
        ncols = q.shape[1]
        for i in range(n_paths):
            state = stream_state(seed, sid0 + i)
            n = n0
            t = 0.0
            tlast = 0.0  # when the terminal state was entered
            over = False
            while True:
                if n <= 0:
                    break
                if n >= nrows:
                    over = True
                    break
                rate = tot[n]
                if rate <= 0.0:
                    break
                state, e = _exp1(state)
                t += e / rate
                if t > horizon:
                    break
                state, u = next_u01(state)
                x = u * rate
                acc = 0.0
                chosen = -2
                for m in range(ncols):
                    qv = q[n, m]
                    if qv > 0.0:
                        acc += qv
                        if x < acc:
                            chosen = m
                            break
                if chosen == -2:
                    n = -1  # killed
                else:
                    n = chosen
                tlast = t
            out_state[i] = n
            out_tlast[i] = tlast
            out_over[i] = 1 if over else 0

    return SimpleNamespace(
        use_jit=use_jit,
        stream_state=stream_state,
        next_u01=next_u01,
        normal=_normal,
        exp1=_exp1,
        culled_terminal=culled_terminal,
        culled_record=culled_record,
        coupled_terminal=coupled_terminal,
        cbi_terminal=cbi_terminal,
        cbi_record=cbi_record,
        culling_terminal=culling_terminal,
        culling_record=culling_record,
        dual_terminal=dual_terminal,
    )


PY_IMPL = _build_impl(False)
JIT_IMPL = _build_impl(True) if HAVE_NUMBA else None
IMPL = JIT_IMPL if JIT_IMPL is not None else PY_IMPL
USING_JIT = IMPL.use_jit
