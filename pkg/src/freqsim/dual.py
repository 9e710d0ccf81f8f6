"""Block-counting dual of the frequency process.

The frequency process acting on monomials r^n matches, term by term, a
continuous-time chain on {0, 1, 2, ...} with an extra killing state: down
moves collect the coalescence/resampling terms, up moves the selection
terms theta_k and the diffusion imbalance c1 - c2, and killing collects the
type-2 drift and the u2 jump mass.  The pairing function is H(r, n) = r^n
with H(r, dagger) = 0, so E[R_t^n] can be cross-checked against E[r^{N_t}].

All rates are finite atom sums.  The chain only exists when every
off-diagonal rate is nonnegative; `build_rates` returns a typed violation
report instead of a table when that fails.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from math import comb

import numpy as np

from . import _kernels
from ._kernels import STREAM_REGION
from .measures import gamma_n, lambda_nk, vartheta_n
from .model import ModelParams, validate_params
from .simulate import culled_frequency_ensemble, sample_moment


class _Dagger:
    """Killing state singleton; serializes as the literal string 'dagger'."""

    __slots__ = ()

    def __repr__(self):
        return "dagger"

    def __str__(self):
        return "dagger"


DAGGER = _Dagger()


def theta_k(params: ModelParams, z: float, k: int) -> float:
    """Selection coefficient of the up-move n -> n + k."""
    if not (isinstance(k, int) and k >= 1):
        raise ValueError(f"k must be an integer >= 1, got {k}")
    if not (z > 0.0 and math.isfinite(z)):
        raise ValueError(f"z must be positive and finite, got {z}")
    m11 = params.b11.degree
    m12 = params.b12.degree
    m21 = params.b21.degree
    m22 = params.b22.degree
    a11 = params.b11.coefficient
    a12 = params.b12.coefficient
    a21 = params.b21.coefficient
    a22 = params.b22.coefficient
    sign = -1.0 if k % 2 == 0 else 1.0  # (-1)^(k+1)
    out = 0.0
    if k < m11:
        out += a11(k + 1) * z**k
    if k <= m11:
        out -= a11(k) * z ** (k - 1)
    if k <= m21:
        out -= a21(k) * z ** (k - 1)
    if k <= m22:
        out += sign * sum(comb(l, k) * a22(l) * z ** (l - 1) for l in range(k, m22 + 1))
    if k < m12:
        out += sign * sum(
            comb(l + 1, k + 1) * a12(l) * z ** (l - 1) for l in range(k + 1, m12 + 1)
        )
    if k <= m12:
        out += sign * a12(k) * z ** (k - 1)
    return out


@dataclass(frozen=True)
class PositivityViolation:
    """Negative off-diagonal rates found while building the table.

    Each entry is (n, m, rate) with m an integer target or DAGGER.
    """

    violations: tuple

    def __bool__(self):
        return False  # so `if build_rates(...)` selects the happy path

    def describe(self) -> str:
        rows = ", ".join(f"q({n},{m})={rate:.6g}" for n, m, rate in self.violations[:8])
        more = "" if len(self.violations) <= 8 else f" and {len(self.violations) - 8} more"
        return f"negative transition rates: {rows}{more}"


class PositivityError(RuntimeError):
    """A lazy table extension hit a negative rate mid-run."""

    def __init__(self, violation: PositivityViolation):
        super().__init__(violation.describe())
        self.violation = violation


class DualRates:
    """Dense rate table of the block-counting chain, lazily extensible.

    Row n holds targets m in [0, n + max(m_tilde, 1)]; kill[n] is the rate
    to the dagger state.  Rows above n_max are built on demand up to
    hard_cap, beyond which extension fails loudly rather than truncating
    the chain.
    """

    def __init__(self, params: ModelParams, z: float, n_max: int, hard_cap: int | None = None):
        problems = validate_params(params)
        if problems:
            raise ValueError("invalid model parameters: " + "; ".join(problems))
        if not (z > 0.0 and math.isfinite(z)):
            raise ValueError(f"z must be positive and finite, got {z}")
        if not (isinstance(n_max, int) and n_max >= 1):
            raise ValueError(f"n_max must be an integer >= 1, got {n_max}")
        self.params = params
        self.z = float(z)
        self.m_tilde = params.m_tilde
        # the diffusion/gamma up-move lands on n+1 even when every b is
        # constant, so the up window is at least 1 wide
        self.m_up = max(self.m_tilde, 1)
        self.hard_cap = 10 * n_max if hard_cap is None else int(hard_cap)
        if self.hard_cap < n_max:
            raise ValueError("hard_cap must be >= n_max")
        self._theta = [0.0] + [theta_k(params, self.z, k) for k in range(1, self.m_tilde + 1)]
        self.n_max = 0
        self.q = np.zeros((1, 1 + self.m_up), dtype=np.float64)
        self.kill = np.zeros(1, dtype=np.float64)
        self.tot = np.zeros(1, dtype=np.float64)
        bad = self._grow(n_max)
        if bad:
            # callers go through build_rates, which converts this to the
            # typed report; direct constructor use gets the exception
            raise PositivityError(PositivityViolation(tuple(bad)))

    def _row(self, n: int) -> tuple[np.ndarray, float]:
        p = self.params
        z = self.z
        row = np.zeros(n + self.m_up + 1, dtype=np.float64)
        for m in range(0, n):
            k = n - m + 1
            q = 0.0
            if m == n - 1:
                q += comb(n, 2) * (2.0 / z) * p.c1
                q += n * (p.b11.coefficient(0) + p.b12(z) + p.eta1) / z
            if m > 0:
                q += comb(n, k) * z * (lambda_nk(p.mu1, z, n, k) - lambda_nk(p.mu2, z, n, k))
            q += comb(n, k - 1) * z * lambda_nk(p.mu2, z, n, k - 1)
            q += comb(n, k - 1) * lambda_nk(p.nu, z, n, k - 1)
            row[m] = q
        up1 = comb(n + 1, 2) * (2.0 / z) * (p.c1 - p.c2)
        up1 -= z * (gamma_n(p.mu1, z, n, 1) - gamma_n(p.mu2, z, n, 2))
        if self.m_tilde >= 1:
            up1 += n * self._theta[1]
        row[n + 1] = up1
        for j in range(2, self.m_tilde + 1):
            row[n + j] = n * self._theta[j]
        kill = z * vartheta_n(p.mu1, z, n) + vartheta_n(p.nu, z, n)
        kill += n * (p.b22.coefficient(0) + p.b21(z) + p.eta2) / z
        return row, kill

    def _grow(self, new_n_max: int) -> list:
        old = self.n_max
        q = np.zeros((new_n_max + 1, new_n_max + self.m_up + 1), dtype=np.float64)
        q[: old + 1, : old + self.m_up + 1] = self.q
        kill = np.zeros(new_n_max + 1, dtype=np.float64)
        kill[: old + 1] = self.kill
        bad = []
        for n in range(old + 1, new_n_max + 1):
            row, kn = self._row(n)
            for m, v in enumerate(row):
                if m != n and v < 0.0:
                    bad.append((n, m, float(v)))
            if kn < 0.0:
                bad.append((n, DAGGER, float(kn)))
            q[n, : len(row)] = row
            kill[n] = kn
        if bad:
            return bad
        self.q = q
        self.kill = kill
        self.tot = q.sum(axis=1) + kill
        self.n_max = new_n_max
        return []

    def extend_to(self, new_n_max: int) -> None:
        if new_n_max <= self.n_max:
            return
        if new_n_max > self.hard_cap:
            raise RuntimeError(
                f"dual chain needs rows up to {new_n_max}, beyond hard cap {self.hard_cap}"
            )
        bad = self._grow(new_n_max)
        if bad:
            raise PositivityError(PositivityViolation(tuple(bad)))

    def rate(self, n: int, m) -> float:
        """Stored rate n -> m; m may be DAGGER (or the string 'dagger')."""
        if not 1 <= n <= self.n_max:
            raise ValueError(f"n must be in [1, {self.n_max}], got {n}")
        if m is DAGGER or m == "dagger":
            return float(self.kill[n])
        if not (0 <= m <= self.n_max + self.m_up):
            return 0.0
        if m == n:
            raise ValueError("diagonal entries are not part of the table")
        if m > n + self.m_up:
            return 0.0
        return float(self.q[n, m])

    def rows(self):
        """Yield (n, m, rate) for nonzero entries, dagger last per n."""
        for n in range(1, self.n_max + 1):
            for m in range(0, n + self.m_up + 1):
                if m != n and self.q[n, m] != 0.0:
                    yield n, m, float(self.q[n, m])
            if self.kill[n] != 0.0:
                yield n, DAGGER, float(self.kill[n])


def build_rates(params: ModelParams, z: float, n_max: int, hard_cap: int | None = None):
    """DualRates for n <= n_max, or a PositivityViolation report."""
    try:
        return DualRates(params, z, n_max, hard_cap)
    except PositivityError as exc:
        return exc.violation


def simulate_dual(rates: DualRates, n0: int, horizon: float, seed: int, stream: int = 0, impl=None):
    """Terminal state at the horizon: an integer >= 0 or DAGGER."""
    state, _ = dual_ensemble(rates, n0, horizon, 1, seed, sid0=stream, impl=impl)
    n = int(state[0])
    return DAGGER if n < 0 else n


def dual_ensemble(rates, n0, horizon, n_paths, seed, *, sid0=None, region=1, impl=None):
    """Terminal states and entry times of n_paths independent chains.

    Returns (state, t_entered): state[i] is the chain value at the horizon
    with -1 for the killed state; t_entered[i] is when the chain entered
    that state (the absorption time for absorbed paths).  The table grows
    transparently if a path climbs past the built rows, and replaying after
    growth reproduces unaffected paths exactly.
    """
    if not (isinstance(n0, int) and n0 >= 0):
        raise ValueError(f"n0 must be a nonnegative integer, got {n0}")
    if n0 > rates.hard_cap:
        raise ValueError(f"n0={n0} exceeds the table hard cap {rates.hard_cap}")
    if sid0 is None:
        sid0 = region * STREAM_REGION
    k = _kernels.IMPL if impl is None else impl
    rates.extend_to(max(min(rates.hard_cap, n0), rates.n_max))
    out_state = np.empty(n_paths, dtype=np.int64)
    out_tlast = np.empty(n_paths, dtype=np.float64)
    out_over = np.empty(n_paths, dtype=np.int64)
    while True:
        k.dual_terminal(
            n_paths,
            int(seed),
            sid0,
            n0,
            float(horizon),
            rates.q,
            rates.kill,
            rates.tot,
            out_state,
            out_tlast,
            out_over,
        )
        if not out_over.any():
            return out_state, out_tlast
        # grow the table and replay; unaffected paths reproduce exactly
        target = min(2 * rates.n_max, rates.hard_cap)
        if target <= rates.n_max:
            raise RuntimeError(
                f"dual chain exceeded the hard cap {rates.hard_cap} during simulation"
            )
        rates.extend_to(target)


def dual_moment(
    rates: DualRates,
    n0: int,
    r: float,
    t: float,
    n_paths: int,
    seed: int,
    *,
    region: int = 1,
    impl=None,
) -> tuple[float, float]:
    """Monte Carlo estimate of E[H(r, N_t)] with H(r,n)=r^n, H(r,dagger)=0."""
    if not 0.0 <= r <= 1.0:
        raise ValueError(f"r must be in [0, 1], got {r}")
    state, _ = dual_ensemble(rates, n0, t, n_paths, seed, region=region, impl=impl)
    h = np.where(state >= 0, np.power(float(r), state.clip(min=0), dtype=np.float64), 0.0)
    n = len(h)
    se = float(h.std(ddof=1) / math.sqrt(n)) if n > 1 else math.inf
    return float(h.mean()), se


def generator_identity_residual(
    params: ModelParams, z: float, n_max: int, r_grid
) -> float:
    """Max |generator on r^n - rate-table form| over n <= n_max and the grid.

    This is the table's certificate: the left side evaluates the analytic
    generator directly, the right side goes through lambda/gamma/vartheta/
    theta bookkeeping, and they must agree to float round-off.
    """
    from .model import generator_on_monomial

    rates = build_rates(params, z, n_max)
    if isinstance(rates, PositivityViolation):
        raise PositivityError(rates)
    worst = 0.0
    for n in range(1, n_max + 1):
        row = rates.q[n]
        kn = rates.kill[n]
        for r in r_grid:
            lhs = generator_on_monomial(params, z, n, float(r))
            rn = float(r) ** n
            rhs = -kn * rn
            for m in range(0, n + rates.m_up + 1):
                if m != n and row[m] != 0.0:
                    rhs += row[m] * (float(r) ** m - rn)
            worst = max(worst, abs(lhs - rhs))
    return worst


@dataclass(frozen=True)
class DualityReport:
    lhs: tuple[float, float]
    rhs: tuple[float, float]
    z_score: float


def duality_check(
    params: ModelParams,
    z: float,
    r: float,
    n0: int,
    t: float,
    n_paths: int,
    seed: int,
    *,
    dt: float = 5e-4,
    impl=None,
) -> DualityReport:
    """Compare E[R_t^n0] (paths) against E[r^{N_t}] (dual chain).

    The two ensembles use disjoint stream regions of the same seed.
    """
    rates = build_rates(params, z, max(n0, 1))
    if isinstance(rates, PositivityViolation):
        raise PositivityError(rates)
    ens = culled_frequency_ensemble(
        params, z, r, horizon=t, dt=dt, n_paths=n_paths, seed=seed, region=0, impl=impl
    )
    lhs = sample_moment(ens.r, n0)
    rhs = dual_moment(rates, n0, r, t, n_paths, seed, region=1, impl=impl)
    gap = abs(lhs[0] - rhs[0])
    spread = math.hypot(lhs[1], rhs[1])
    if spread > 0.0:
        z_score = gap / spread
    else:
        z_score = 0.0 if gap == 0.0 else math.inf
    return DualityReport(lhs=lhs, rhs=rhs, z_score=z_score)
