"""Large-population limit of the frequency process.

As z grows the culled frequency SDE loses its noise and its compensator
terms and what remains is a polynomial ODE driven by the rescaled
interaction limits beta_ij(r) = lim b_ij(rz)/z plus the two cross-jump
means.  This module evaluates and integrates that ODE, finds and
classifies its equilibria, reproduces the closed-form analyses available
for the linear and logistic coefficient families, and measures the speed
of the z to infinity convergence against simulated paths.

Only explicit scaling families are supported.  A generic z-dependent b
need not have a limit at all (x(1-x) diverges, x sin x oscillates), so
nothing is inferred from a single fixed-z model.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from numpy.polynomial import Polynomial
from numpy.polynomial import polynomial as npoly

from .measures import mean_component
from .model import ModelParams, PolynomialMalthusian
from .simulate import Trajectory, _steps_for, culled_frequency_ensemble

__all__ = [
    "STABLE",
    "UNSTABLE",
    "SEMISTABLE",
    "ScalingFamilyError",
    "LimitParams",
    "EquilibriumReport",
    "ModelFamily",
    "limit_rhs",
    "rhs_coefficients",
    "limit_params_from_model",
    "linear_limit_params",
    "logistic_limit_params",
    "integrate",
    "find_equilibria",
    "linear_case_closed_form",
    "logistic_case_closed_form",
    "phase_diagram",
    "large_population_experiment",
]

STABLE = "stable"
UNSTABLE = "unstable"
SEMISTABLE = "semistable"

# double-root detection threshold on |RHS'| at a root
_FLAT_SLOPE = 1e-9
# residual bound certifying a reported equilibrium location
_ROOT_RESIDUAL = 1e-10


class ScalingFamilyError(ValueError):
    """The model does not belong to the declared scaling family."""


def _as_poly(p) -> PolynomialMalthusian:
    return p if isinstance(p, PolynomialMalthusian) else PolynomialMalthusian(p)


@dataclass(frozen=True)
class LimitParams:
    """Coefficients of the limit ODE.

    beta_ij are the interaction limits; j21 and j12 are the mean cross
    masses (integral of w1 against mu2 and of w2 against mu1) that survive
    from the jump compensators.  Cross interactions push inward, so beta12
    and beta21 must be coefficientwise nonnegative.
    """

    beta11: PolynomialMalthusian = PolynomialMalthusian()
    beta12: PolynomialMalthusian = PolynomialMalthusian()
    beta21: PolynomialMalthusian = PolynomialMalthusian()
    beta22: PolynomialMalthusian = PolynomialMalthusian()
    j21: float = 0.0
    j12: float = 0.0

    def __post_init__(self):
        for name in ("beta11", "beta12", "beta21", "beta22"):
            object.__setattr__(self, name, _as_poly(getattr(self, name)))
        for name in ("beta12", "beta21"):
            poly = getattr(self, name)
            if any(c < 0.0 for c in poly.coeffs):
                raise ValueError(f"{name} must have nonnegative coefficients, got {poly.coeffs}")
        for name in ("j21", "j12"):
            v = getattr(self, name)
            if not (v >= 0.0 and math.isfinite(v)):
                raise ValueError(f"{name} must be finite and >= 0, got {v}")


def _raw_eval(poly: PolynomialMalthusian, x: float) -> float:
    # plain Horner on the stored coefficients; the mass truncation of the
    # finite-z model has no meaning for the limit coefficients
    acc = 0.0
    for c in reversed(poly.coeffs):
        acc = acc * x + c
    return acc


def limit_rhs(lp: LimitParams, r: float) -> float:
    """Right-hand side of the limit ODE at frequency r."""
    q = 1.0 - r
    return (
        _raw_eval(lp.beta11, r) * q
        - _raw_eval(lp.beta22, q) * r
        + _raw_eval(lp.beta12, q) * q
        - _raw_eval(lp.beta21, r) * r
        + lp.j21 * q * q
        - lp.j12 * r * r
    )


def _compose_in_q(coeffs) -> np.ndarray:
    # coefficient vector of p(1 - r) as a polynomial in r
    return Polynomial(np.asarray(coeffs, dtype=np.float64))(Polynomial([1.0, -1.0])).coef


def rhs_coefficients(lp: LimitParams) -> np.ndarray:
    """Expanded coefficient vector of the RHS, lowest power first."""
    one_minus_r = np.array([1.0, -1.0])
    minus_r = np.array([0.0, -1.0])
    c = npoly.polymul(np.asarray(lp.beta11.coeffs or (0.0,)), one_minus_r)
    c = npoly.polyadd(c, npoly.polymul(_compose_in_q(lp.beta22.coeffs or (0.0,)), minus_r))
    c = npoly.polyadd(c, npoly.polymul(_compose_in_q(lp.beta12.coeffs or (0.0,)), one_minus_r))
    c = npoly.polyadd(c, npoly.polymul(np.asarray(lp.beta21.coeffs or (0.0,)), minus_r))
    c = npoly.polyadd(c, lp.j21 * np.array([1.0, -2.0, 1.0]))
    c = npoly.polyadd(c, np.array([0.0, 0.0, -lp.j12]))
    c = np.trim_zeros(np.asarray(c, dtype=np.float64), "b")
    return c if len(c) else np.zeros(1)


_FAMILIES = {"linear": "linear", "per-z-linear": "linear", "logistic": "logistic"}


def _family(scaling: str) -> str:
    try:
        return _FAMILIES[scaling]
    except KeyError:
        raise ScalingFamilyError(
            f"unknown scaling family {scaling!r}; supported: linear (per-z-linear), logistic"
        ) from None


def limit_params_from_model(params: ModelParams, scaling: str, z: float = 1.0) -> LimitParams:
    """Extract the limit coefficients of a model in a declared family.

    The model is read as the member of the family at population size z
    (default 1).  Linear members look the same at every z; logistic members
    carry the competition coefficient as c_ii / z in the quadratic term.
    """
    fam = _family(scaling)
    if not (z > 0.0 and math.isfinite(z)):
        raise ValueError(f"z must be positive and finite, got {z}")
    if fam == "linear":
        for name in ("b11", "b12", "b21", "b22"):
            poly = getattr(params, name)
            if poly.degree > 1 or poly.coefficient(0) != 0.0:
                raise ScalingFamilyError(
                    f"linear family needs {name}(x) = a x, got coefficients {poly.coeffs}"
                )
        return LimitParams(
            beta11=(0.0, params.b11.coefficient(1)),
            beta12=(0.0, params.b12.coefficient(1)),
            beta21=(0.0, params.b21.coefficient(1)),
            beta22=(0.0, params.b22.coefficient(1)),
            j21=mean_component(params.mu2, 1),
            j12=mean_component(params.mu1, 2),
        )
    for name in ("b12", "b21"):
        poly = getattr(params, name)
        if any(c != 0.0 for c in poly.coeffs):
            raise ScalingFamilyError(f"logistic family needs {name} identically zero")
    for name in ("b11", "b22"):
        poly = getattr(params, name)
        if poly.degree > 2 or poly.coefficient(0) != 0.0:
            raise ScalingFamilyError(
                f"logistic family needs {name}(x) = c x^2/z + a x, got coefficients {poly.coeffs}"
            )
    for name, other in (("mu1", 2), ("mu2", 1)):
        mu = getattr(params, name)
        if any((a.w2 if other == 2 else a.w1) > 0.0 for a in mu):
            raise ScalingFamilyError(
                f"logistic family forbids {name} charging the type-{other} coordinate"
            )
    return LimitParams(
        beta11=(0.0, params.b11.coefficient(1), params.b11.coefficient(2) * z),
        beta22=(0.0, params.b22.coefficient(1), params.b22.coefficient(2) * z),
    )


def linear_limit_params(d1: float, d2: float, d3: float) -> LimitParams:
    """A LimitParams realizing RHS = d1 r(1-r) + d2 (1-r)^2 - d3 r^2."""
    return LimitParams(
        beta11=(0.0, max(d1, 0.0)),
        beta22=(0.0, max(-d1, 0.0)),
        beta12=(0.0, d2),
        beta21=(0.0, d3),
    )


def logistic_limit_params(d1: float, d2: float) -> LimitParams:
    """A LimitParams realizing RHS = d1 r(1-r)(r - d2/d1) = r(1-r)(d1 r - d2)."""
    return LimitParams(beta11=(0.0, -d2, d1))


@dataclass(frozen=True)
class ModelFamily:
    """A z-indexed family of models sharing one large-population limit.

    base is the member at z = 1; at(z) rescales whatever the family makes
    z-dependent (only the logistic quadratic term).
    """

    base: ModelParams
    scaling: str

    def __post_init__(self):
        object.__setattr__(self, "scaling", _family(self.scaling))
        limit_params_from_model(self.base, self.scaling)  # reject mismatches early

    def limit(self) -> LimitParams:
        return limit_params_from_model(self.base, self.scaling)

    def at(self, z: float) -> ModelParams:
        if not (z > 0.0 and math.isfinite(z)):
            raise ValueError(f"z must be positive and finite, got {z}")
        if self.scaling == "linear":
            return self.base
        b11 = self.base.b11
        b22 = self.base.b22
        return replace(
            self.base,
            b11=(0.0, b11.coefficient(1), b11.coefficient(2) / z),
            b22=(0.0, b22.coefficient(1), b22.coefficient(2) / z),
        )


def integrate(lp: LimitParams, r0: float, horizon: float, dt: float) -> Trajectory:
    """Classical fourth-order Runge-Kutta solution of the limit ODE.

    Values are clamped to [0, 1] and clamps are logged as events; the RHS
    of a model-derived lp points inward at both ends, so any clamp means
    dt is too large for the requested accuracy.
    """
    if not 0.0 <= r0 <= 1.0:
        raise ValueError(f"r0 must be in [0, 1], got {r0}")
    n_steps, h = _steps_for(horizon, dt)
    coeffs = rhs_coefficients(lp)

    def f(x):
        return float(npoly.polyval(x, coeffs))

    times = h * np.arange(n_steps + 1)
    values = np.empty(n_steps + 1, dtype=np.float64)
    values[0] = r = r0
    events = []
    for k in range(n_steps):
        k1 = f(r)
        k2 = f(r + 0.5 * h * k1)
        k3 = f(r + 0.5 * h * k2)
        k4 = f(r + h * k3)
        r = r + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if r < 0.0 or r > 1.0:
            over = -r if r < 0.0 else r - 1.0
            events.append((float(times[k + 1]), "clamp", float(over)))
            r = min(max(r, 0.0), 1.0)
        values[k + 1] = r
    return Trajectory(times=times, values=values, events=events)


@dataclass(frozen=True)
class EquilibriumReport:
    """Sorted equilibria of the limit ODE with stability labels.

    degenerate marks an identically zero RHS, where every point is a rest
    point and a root list would be meaningless.
    """

    equilibria: tuple
    case_label: str | None = None
    degenerate: bool = False


def _classify(root: float, coeffs: np.ndarray, dcoeffs: np.ndarray) -> str:
    slope = float(npoly.polyval(root, dcoeffs))
    if slope < -_FLAT_SLOPE:
        return STABLE
    if slope > _FLAT_SLOPE:
        return UNSTABLE
    # flat slope: look at the flow on whichever sides exist inside [0, 1]
    h = 1e-6
    left = float(npoly.polyval(root - h, coeffs)) if root - h >= 0.0 else None
    right = float(npoly.polyval(root + h, coeffs)) if root + h <= 1.0 else None
    toward = (left is None or left > 0.0) and (right is None or right < 0.0)
    away = (left is None or left < 0.0) and (right is None or right > 0.0)
    if toward and not (left is None and right is None):
        return STABLE
    if away and not (left is None and right is None):
        return UNSTABLE
    return SEMISTABLE


def _bisect(coeffs: np.ndarray, a: float, b: float, fa: float) -> float:
    # sign-change bisection to interval width 1e-12
    while b - a > 1e-12:
        mid = 0.5 * (a + b)
        fm = float(npoly.polyval(mid, coeffs))
        if fm == 0.0:
            return mid
        if (fa > 0.0) == (fm > 0.0):
            a, fa = mid, fm
        else:
            b = mid
    return 0.5 * (a + b)


def find_equilibria(lp: LimitParams) -> EquilibriumReport:
    """Roots of the RHS in [0, 1] with stability from the local flow.

    Bracketing on a dense grid plus bisection; tangent roots are recovered
    from sign changes of the derivative.  Locations are deduplicated at
    1e-9 and each reported root has |RHS| at most 1e-10.
    """
    coeffs = rhs_coefficients(lp)
    if not np.any(coeffs):
        return EquilibriumReport(equilibria=(), degenerate=True)
    dcoeffs = npoly.polyder(coeffs)
    grid = np.linspace(0.0, 1.0, 1024)
    vals = npoly.polyval(grid, coeffs)
    roots = [float(g) for g, v in zip(grid, vals) if v == 0.0]
    # boundary rest points are exact in the factored RHS but pick up
    # round-off in the expanded coefficients; admit them at scaled epsilon
    btol = 1e-12 * max(1.0, float(np.abs(coeffs).sum()))
    for edge, v in ((0.0, float(vals[0])), (1.0, float(vals[-1]))):
        if abs(v) <= btol:
            roots.append(edge)
    for i in range(len(grid) - 1):
        fa, fb = float(vals[i]), float(vals[i + 1])
        if fa * fb < 0.0:
            roots.append(_bisect(coeffs, float(grid[i]), float(grid[i + 1]), fa))
    if len(dcoeffs) and np.any(dcoeffs):
        # a double root hides from the value scan but not from the slope scan
        dvals = npoly.polyval(grid, dcoeffs)
        for i in range(len(grid) - 1):
            da, db = float(dvals[i]), float(dvals[i + 1])
            if da * db < 0.0:
                c = _bisect(dcoeffs, float(grid[i]), float(grid[i + 1]), da)
                if abs(float(npoly.polyval(c, coeffs))) <= _ROOT_RESIDUAL:
                    roots.append(c)
    kept = []
    for r in sorted(roots):
        if not kept or r - kept[-1] > 1e-9:
            kept.append(r)
    eqs = tuple((r, _classify(r, coeffs, dcoeffs)) for r in kept)
    return EquilibriumReport(equilibria=eqs)


def _linear_coeffs(d1: float, d2: float, d3: float) -> np.ndarray:
    # d1 r(1-r) + d2 (1-r)^2 - d3 r^2, expanded
    return np.array([d2, d1 - 2.0 * d2, d2 - d1 - d3])


def linear_case_closed_form(d1: float, d2: float, d3: float) -> EquilibriumReport:
    """Equilibria of the linear-family ODE from the closed-form root formulas.

    Splits on d2 - d1 - d3: when nonzero the roots come from the quadratic
    formula with radicand d1^2 + 4 d2 d3 (only this radicand sign survives
    cross-validation against the numeric root finder), when zero the RHS is
    affine with the single root d2 / (2 d2 - d1).  Stability is read off
    the slope, which reproduces the published case table for every valid
    (d2, d3 >= 0) input.
    """
    coeffs = _linear_coeffs(d1, d2, d3)
    dcoeffs = npoly.polyder(coeffs)
    if d1 == 0.0 and d2 == 0.0 and d3 == 0.0:
        return EquilibriumReport(equilibria=(), degenerate=True)
    lead = d2 - d1 - d3
    if lead == 0.0:
        den = 2.0 * d2 - d1
        if den == 0.0:
            return EquilibriumReport(equilibria=())  # RHS constant, no rest point
        locs = [d2 / den]
        if d2 == 0.0 and d1 == -d3:
            label = "2a"
        elif d1 == d2 and d3 == 0.0:
            label = "2b"
        else:
            label = "2c"
    else:
        rad = d1 * d1 + 4.0 * d2 * d3
        locs = []
        if rad >= 0.0:
            # stable evaluation of (2 d2 - d1 +- sqrt(rad)) / (2 lead): the
            # textbook form cancels catastrophically when lead is tiny
            sq = math.sqrt(rad)
            b = d1 - 2.0 * d2
            qq = -0.5 * (b + math.copysign(sq, b if b != 0.0 else 1.0))
            if qq != 0.0:
                locs = [qq / lead, d2 / qq]
            else:  # rad = b^2 with d2 = 0: roots 0 and -b/lead
                locs = [0.0, -b / lead]
        if d2 == 0.0 and d3 == 0.0:
            label = "1a" if d1 < 0.0 else "1b"
        elif d2 == 0.0 and d3 > 0.0:
            label = "1c" if d1 <= 0.0 else "1e"
        elif d3 == 0.0 and d2 > 0.0:
            label = "1d" if d1 >= 0.0 else "1f"
        elif d2 > 0.0 and d3 > 0.0:
            label = "1g"
        else:
            label = None  # outside the published table (negative d2 or d3)
    kept = []
    for loc in sorted(locs):
        if loc < -1e-12 or loc > 1.0 + 1e-12:
            continue
        loc = min(max(loc, 0.0), 1.0)
        if loc == 0.0:
            loc = 0.0  # drop the sign of -0.0 from the radical formula
        if not kept or loc - kept[-1] > 1e-9:
            kept.append(loc)
    eqs = tuple((loc, _classify(loc, coeffs, dcoeffs)) for loc in kept)
    return EquilibriumReport(equilibria=eqs, case_label=label)


def logistic_case_closed_form(d1: float, d2: float) -> EquilibriumReport:
    """Equilibria of the logistic-family ODE r(1-r)(d1 r - d2).

    The boundaries are always rest points; an interior one exists exactly
    when d1 d2 > 0 and |d1| > |d2|, at d2/d1, stable for d2 < 0 and
    unstable for d2 > 0.
    """
    coeffs = np.array([0.0, -d2, d1 + d2, -d1])
    dcoeffs = npoly.polyder(coeffs)
    eqs = [(0.0, _classify(0.0, coeffs, dcoeffs))]
    label = None
    if d1 * d2 > 0.0 and abs(d1) > abs(d2):
        eqs.append((d2 / d1, STABLE if d2 < 0.0 else UNSTABLE))
        label = "d2<0" if d2 < 0.0 else "d2>0"
    eqs.append((1.0, _classify(1.0, coeffs, dcoeffs)))
    return EquilibriumReport(equilibria=tuple(eqs), case_label=label)


def phase_diagram(lp: LimitParams, grid_size: int) -> tuple[np.ndarray, EquilibriumReport]:
    """Uniform RHS samples plus the equilibrium report, ready for plotting."""
    if not (isinstance(grid_size, int) and grid_size >= 2):
        raise ValueError(f"grid_size must be an integer >= 2, got {grid_size}")
    coeffs = rhs_coefficients(lp)
    rs = np.linspace(0.0, 1.0, grid_size)
    samples = np.column_stack([rs, npoly.polyval(rs, coeffs)])
    return samples, find_equilibria(lp)


def large_population_experiment(
    family: ModelFamily,
    r0: float,
    horizon: float,
    z_list,
    *,
    dt: float,
    n_paths: int,
    seed: int,
    impl=None,
) -> list[tuple[float, float, float]]:
    """Pathwise distance to the limit trajectory across population sizes.

    For each z the culled frequency ensemble tracks sup over the grid of
    |R_t - R_t^inf|^2 against the shared RK4 reference; rows are
    (z, mean, standard error).  Each z uses its own stream region so the
    rows are independent of each other and of ordering.
    """
    if n_paths < 2:
        raise ValueError(f"need n_paths >= 2 for a standard error, got {n_paths}")
    z_list = [float(z) for z in z_list]
    if any(not (z > 0.0 and math.isfinite(z)) for z in z_list):
        raise ValueError("every z must be positive and finite")
    _, dt_eff = _steps_for(horizon, dt)
    ref = integrate(family.limit(), r0, horizon, dt_eff).values
    rows = []
    for i, z in enumerate(z_list):
        ens = culled_frequency_ensemble(
            family.at(z),
            z,
            r0,
            horizon=horizon,
            dt=dt,
            n_paths=n_paths,
            seed=seed,
            region=3 + i,
            ref=ref,
            impl=impl,
        )
        mean = float(ens.sup2.mean())
        se = float(ens.sup2.std(ddof=1) / math.sqrt(n_paths))
        rows.append((z, mean, se))
    return rows
