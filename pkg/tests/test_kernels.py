"""The compiled and fallback kernel builds must produce identical bits.

Each path derives its randomness from (seed, stream id) through integer
mixing that is exact in both builds, and all float arithmetic goes through
the same libm functions, so equality here is exact, not approximate.
"""
import numpy as np
import pytest

from freqsim import _kernels
from freqsim.model import ModelParams
from freqsim.measures import JumpMeasure
from freqsim.simulate import StopBand, pack_frequency_model, pack_population_model

pytestmark = pytest.mark.skipif(
    _kernels.JIT_IMPL is None, reason="numba unavailable or disabled"
)


def _params():
    return ModelParams(
        c1=0.5,
        c2=0.25,
        eta1=0.3,
        eta2=0.1,
        b11=(0.0, 0.4),
        b12=(0.0, 0.2),
        b21=(0.0, 0.05),
        b22=(0.0, 0.1),
        mu1=JumpMeasure([(1.0, 0.0, 0.3)]),
        mu2=JumpMeasure([(0.0, 0.5, 0.2)]),
        nu=JumpMeasure([(0.2, 0.1, 0.5)]),
    )


def test_rng_streams_bit_identical():
    py = _kernels.PY_IMPL
    nb = _kernels.JIT_IMPL
    for seed in (0, 1, 12345, _kernels.MAX_SEED):
        for sid in (0, 1, 7, (1 << 32) + 3):
            sp = py.stream_state(seed, sid)
            sn = nb.stream_state(seed, sid)
            for _ in range(50):
                sp, up = py.next_u01(sp)
                # states are plain uint64 words; boxed python ints >= 2**63
                # must be re-tagged for dispatch
                sn, un = nb.next_u01(np.uint64(sn))
                assert up == un
                assert 0.0 < up < 1.0


def test_rng_distinct_streams_differ():
    py = _kernels.PY_IMPL
    s0 = py.stream_state(42, 0)
    s1 = py.stream_state(42, 1)
    _, u0 = py.next_u01(s0)
    _, u1 = py.next_u01(s1)
    assert u0 != u1


def test_rng_uniform_moments():
    py = _kernels.PY_IMPL
    s = py.stream_state(2024, 0)
    n = 20000
    tot = 0.0
    tot2 = 0.0
    for _ in range(n):
        s, u = py.next_u01(s)
        tot += u
        tot2 += u * u
    mean = tot / n
    var = tot2 / n - mean * mean
    assert abs(mean - 0.5) < 0.01
    assert abs(var - 1.0 / 12.0) < 0.005


def test_normal_moments():
    py = _kernels.PY_IMPL
    s = py.stream_state(7, 0)
    n = 20000
    tot = 0.0
    tot2 = 0.0
    for _ in range(n):
        s, x = py.normal(s)
        tot += x
        tot2 += x * x
    assert abs(tot / n) < 0.03
    assert abs(tot2 / n - 1.0) < 0.05


def test_culled_terminal_builds_agree():
    margs = pack_frequency_model(_params(), 1.0)
    ref = np.zeros(0)
    outs = []
    for impl in (_kernels.PY_IMPL, _kernels.JIT_IMPL):
        n = 48
        out_r = np.empty(n)
        out_sup2 = np.empty(n)
        out_cl = np.empty(n, dtype=np.int64)
        out_mo = np.empty(n)
        out_je = np.empty(n, dtype=np.int64)
        impl.culled_terminal(
            n, 999, 0, 0.4, 0.02, 25, *margs, ref, out_r, out_sup2, out_cl, out_mo, out_je
        )
        outs.append((out_r, out_cl, out_mo, out_je))
    for a, b in zip(outs[0], outs[1]):
        assert np.array_equal(a, b)


def test_culled_record_matches_terminal():
    margs = pack_frequency_model(_params(), 1.0)
    sid = 5
    out_r = np.empty(1)
    out_sup2 = np.empty(1)
    out_cl = np.empty(1, dtype=np.int64)
    out_mo = np.empty(1)
    out_je = np.empty(1, dtype=np.int64)
    for impl in (_kernels.PY_IMPL, _kernels.JIT_IMPL):
        impl.culled_terminal(
            1, 31, sid, 0.7, 0.01, 40, *margs, np.zeros(0), out_r, out_sup2, out_cl, out_mo, out_je
        )
        rec_t = np.empty(4096)
        rec_v = np.empty(4096)
        ev_t = np.empty(4096)
        ev_k = np.empty(4096, dtype=np.int64)
        ev_p = np.empty(4096)
        r, _s, cl, mo, je, nrec, nev, overflow = impl.culled_record(
            31, sid, 0.7, 0.01, 40, *margs, rec_t, rec_v, ev_t, ev_k, ev_p
        )
        assert not overflow
        assert r == out_r[0]
        assert cl == out_cl[0] and je == out_je[0]
        assert rec_v[nrec - 1] == out_r[0]
        # sample times strictly increase and start at 0
        t = rec_t[:nrec]
        assert t[0] == 0.0
        assert np.all(np.diff(t) > 0)
        # every event time is a sample time
        assert set(np.round(ev_t[:nev], 15)) <= set(np.round(t, 15))


def test_cbi_builds_agree():
    cargs = pack_population_model(_params())
    band = StopBand(1e-4, 50.0)
    outs = []
    for impl in (_kernels.PY_IMPL, _kernels.JIT_IMPL):
        n = 32
        o = [np.empty(n) for _ in range(2)]
        ot = np.empty(n)
        oi = [np.empty(n, dtype=np.int64) for _ in range(5)]
        mo = np.empty(n)
        impl.cbi_terminal(
            n, 777, 0, 0.6, 0.4, 0.25, 0.005, band.eps, band.cap,
            *cargs, o[0], o[1], ot, oi[0], oi[1], oi[2], oi[3], oi[4], mo,
        )
        outs.append((o[0].copy(), o[1].copy(), ot.copy()))
    assert np.array_equal(outs[0][0], outs[1][0])
    assert np.array_equal(outs[0][1], outs[1][1])
    assert np.array_equal(outs[0][2], outs[1][2])


def test_culling_builds_agree():
    cargs = pack_population_model(_params())
    outs = []
    for impl in (_kernels.PY_IMPL, _kernels.JIT_IMPL):
        n = 24
        out_r = np.empty(n)
        out_abs = np.empty(n, dtype=np.int64)
        out_nep = np.empty(n, dtype=np.int64)
        impl.culling_terminal(
            n, 888, 0, 0.5, 1.0, 1.0, 4.0, 0.25, 0.005, 1e-4, 50.0,
            *cargs, out_r, out_abs, out_nep,
        )
        outs.append((out_r.copy(), out_abs.copy(), out_nep.copy()))
    assert np.array_equal(outs[0][0], outs[1][0])
    assert np.array_equal(outs[0][1], outs[1][1])
    assert np.array_equal(outs[0][2], outs[1][2])


def test_coupled_builds_agree_and_null_case():
    margs = pack_frequency_model(_params(), 1.0)
    outs = []
    for impl in (_kernels.PY_IMPL, _kernels.JIT_IMPL):
        n = 32
        out_r = np.empty(n)
        out_s = np.empty(n)
        impl.coupled_terminal(n, 555, 0, 0.3, 0.6, 0.02, 25, *margs, out_r, out_s)
        outs.append((out_r.copy(), out_s.copy()))
    assert np.array_equal(outs[0][0], outs[1][0])
    assert np.array_equal(outs[0][1], outs[1][1])
    # identical initial conditions stay identical pathwise
    out_r = np.empty(16)
    out_s = np.empty(16)
    _kernels.IMPL.coupled_terminal(16, 556, 0, 0.5, 0.5, 0.02, 25, *margs, out_r, out_s)
    assert np.array_equal(out_r, out_s)


def test_dual_builds_agree():
    # small birth-death table with killing
    rows, cols = 12, 14
    q = np.zeros((rows, cols))
    kill = np.zeros(rows)
    for n in range(1, rows):
        q[n, n - 1] = 0.9 * n
        if n + 1 < cols:
            q[n, n + 1] = 0.4 * n
        kill[n] = 0.05
    tot = q.sum(axis=1) + kill
    outs = []
    for impl in (_kernels.PY_IMPL, _kernels.JIT_IMPL):
        m = 64
        out_s = np.empty(m, dtype=np.int64)
        out_t = np.empty(m)
        out_o = np.empty(m, dtype=np.int64)
        impl.dual_terminal(m, 2468, 0, 5, 3.0, q, kill, tot, out_s, out_t, out_o)
        outs.append((out_s.copy(), out_t.copy(), out_o.copy()))
    assert np.array_equal(outs[0][0], outs[1][0])
    assert np.array_equal(outs[0][1], outs[1][1])
    assert np.array_equal(outs[0][2], outs[1][2])
    assert outs[0][2].sum() == 0  # no overflow in this table
    assert set(np.unique(outs[0][0])) <= set(range(-1, rows))
    assert np.all(outs[0][1] <= 3.0)
