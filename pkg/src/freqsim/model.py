"""Model parameters for the two-type population and its frequency generator.

The population model couples two types through polynomial interaction rates
b_ij, diffusion constants c_i, linear immigration eta_i, reproduction jump
measures mu_1, mu_2 and an immigration measure nu.  At fixed total size z the
frequency of type 1 follows a jump diffusion on [0, 1]; `term_bundle` exposes
its seven coefficient functions, and `generator_on_monomial` evaluates the
full generator on f(r) = r^n, which is the ground truth the dual rate table
and the path simulators are verified against.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

from .measures import (
    JumpMeasure,
    mc_coefficient,
    pushforward,
    sc_coefficient,
)

__all__ = [
    "PolynomialMalthusian",
    "ModelParams",
    "TermBundle",
    "eval_malthusian",
    "term_bundle",
    "generator_on_monomial",
    "validate_params",
]


@dataclass(frozen=True)
class PolynomialMalthusian:
    """Polynomial interaction rate, truncated to 0 for nonpositive mass.

    coeffs[k] multiplies x^k.  The truncation applies to the whole value:
    b(x) = 0 for every x <= 0, even when coeffs[0] != 0.  Rate-table
    constructions use the raw coefficients, not the truncated value at 0.
    """

    coeffs: tuple[float, ...]

    def __init__(self, coeffs: Sequence[float] = ()):
        object.__setattr__(self, "coeffs", tuple(float(c) for c in coeffs))

    def __call__(self, x: float) -> float:
        if x <= 0.0:
            return 0.0
        acc = 0.0
        for c in reversed(self.coeffs):
            acc = acc * x + c
        return acc

    def coefficient(self, k: int) -> float:
        """a_k, zero beyond the stored length."""
        return self.coeffs[k] if 0 <= k < len(self.coeffs) else 0.0

    @property
    def degree(self) -> int:
        """Degree after stripping trailing zero coefficients (zero poly -> 0)."""
        for k in range(len(self.coeffs) - 1, -1, -1):
            if self.coeffs[k] != 0.0:
                return k
        return 0


def eval_malthusian(b: PolynomialMalthusian, x: float) -> float:
    """Truncated polynomial value: 0 for x <= 0, Horner evaluation otherwise."""
    return b(x)


def _as_poly(p) -> PolynomialMalthusian:
    if isinstance(p, PolynomialMalthusian):
        return p
    return PolynomialMalthusian(p)


@dataclass(frozen=True)
class ModelParams:
    """Full parameter set of the two-type model."""

    c1: float = 0.0
    c2: float = 0.0
    eta1: float = 0.0
    eta2: float = 0.0
    b11: PolynomialMalthusian = field(default_factory=PolynomialMalthusian)
    b12: PolynomialMalthusian = field(default_factory=PolynomialMalthusian)
    b21: PolynomialMalthusian = field(default_factory=PolynomialMalthusian)
    b22: PolynomialMalthusian = field(default_factory=PolynomialMalthusian)
    mu1: JumpMeasure = field(default_factory=JumpMeasure)
    mu2: JumpMeasure = field(default_factory=JumpMeasure)
    nu: JumpMeasure = field(default_factory=JumpMeasure)

    def __post_init__(self):
        for name in ("b11", "b12", "b21", "b22"):
            object.__setattr__(self, name, _as_poly(getattr(self, name)))

    @property
    def m_tilde(self) -> int:
        """Largest interaction polynomial degree (up-jump span of the dual)."""
        return max(self.b11.degree, self.b12.degree, self.b21.degree, self.b22.degree)


def validate_params(params: ModelParams) -> list[str]:
    """Collect constraint violations; an empty list means the model is usable."""
    problems = []
    if not (params.c1 >= 0.0 and math.isfinite(params.c1)):
        problems.append(f"c1 must be finite and >= 0, got {params.c1}")
    if not (params.c2 >= 0.0 and math.isfinite(params.c2)):
        problems.append(f"c2 must be finite and >= 0, got {params.c2}")
    if not (params.eta1 >= 0.0 and math.isfinite(params.eta1)):
        problems.append(f"eta1 must be finite and >= 0, got {params.eta1}")
    if not (params.eta2 >= 0.0 and math.isfinite(params.eta2)):
        problems.append(f"eta2 must be finite and >= 0, got {params.eta2}")
    for name in ("b11", "b12", "b21", "b22"):
        poly = getattr(params, name)
        for k, c in enumerate(poly.coeffs):
            if not math.isfinite(c):
                problems.append(f"{name} coefficient {k} is not finite: {c}")
    # JumpMeasure atoms self-validate at construction; re-check defensively in
    # case a measure was built around the constructor.
    for name in ("mu1", "mu2", "nu"):
        mu = getattr(params, name)
        for i, a in enumerate(mu):
            if a.w1 < 0.0 or a.w2 < 0.0 or a.w1 + a.w2 <= 0.0 or a.mass <= 0.0:
                problems.append(f"{name} atom {i} is invalid: ({a.w1}, {a.w2}, {a.mass})")
    return problems


@dataclass(frozen=True)
class TermBundle:
    """The seven coefficient functions of the frequency equation at a point r.

    d_tilde: interaction drift; s: diffusion-asymmetry drift; s_c: jump
    selection drift; m: immigration drift; m_c1/m_c2: cross-coordinate jump
    compensations; sigma: diffusion amplitude (the square root, not sigma^2).
    """

    d_tilde: float
    s: float
    s_c: float
    m: float
    m_c1: float
    m_c2: float
    sigma: float

    @property
    def drift_total(self) -> float:
        """Sum of the six drift entries (everything but sigma)."""
        return self.d_tilde + self.s + self.s_c + self.m + self.m_c1 + self.m_c2


def term_bundle(params: ModelParams, z: float, r: float) -> TermBundle:
    """Evaluate all coefficient functions of the frequency equation at r."""
    if not (z > 0.0 and math.isfinite(z)):
        raise ValueError(f"z must be positive and finite, got {z}")
    if not (0.0 <= r <= 1.0):
        raise ValueError(f"r must lie in [0, 1], got {r}")
    one_r = 1.0 - r
    d_tilde = (
        params.b11(z * r) * one_r
        - params.b22(z * one_r) * r
        + params.b12(z * one_r) * one_r
        - params.b21(z * r) * r
    ) / z
    s = (2.0 / z) * (params.c2 - params.c1) * r * one_r
    s_c = sc_coefficient(params.mu1, params.mu2, z) * r * one_r
    m = (params.eta1 * one_r - params.eta2 * r) / z
    m_c1 = -(r * r) * mc_coefficient(params.mu1, z, 1)
    m_c2 = (one_r * one_r) * mc_coefficient(params.mu2, z, 2)
    var = (2.0 / z) * r * one_r * (params.c1 * one_r + params.c2 * r)
    sigma = math.sqrt(var) if var > 0.0 else 0.0
    return TermBundle(d_tilde, s, s_c, m, m_c1, m_c2, sigma)


def _freq_jump(r: float, u1: float, u2: float) -> float:
    """Post-jump frequency r + (1-r) u1 - r u2; maps [0,1] into [0,1]."""
    return r * (1.0 - u2) + (1.0 - r) * u1


def generator_on_monomial(params: ModelParams, z: float, n: int, r: float) -> float:
    """Frequency generator applied to f(r) = r^n.

    Four pieces: drift times f', half sigma^2 times f'' (zero for n = 1), and
    the three jump integrals (type-1 and type-2 reproduction with their linear
    compensations, plus raw immigration).
    """
    if not (isinstance(n, int) and n >= 1):
        raise ValueError(f"n must be a positive integer, got {n}")
    bundle = term_bundle(params, z, r)
    fp = n * r ** (n - 1)
    drift_part = (bundle.d_tilde + bundle.s + bundle.m) * fp
    if n >= 2:
        diff_part = 0.5 * bundle.sigma**2 * n * (n - 1) * r ** (n - 2)
    else:
        diff_part = 0.0
    rn = r**n
    jump1 = 0.0
    for p in pushforward(params.mu1, z):
        rest = 1.0 - p.u1 - p.u2
        jump1 += p.mass * (_freq_jump(r, p.u1, p.u2) ** n - rn - (1.0 - r) * p.u1 / rest * fp)
    jump1 *= r * z
    jump2 = 0.0
    for p in pushforward(params.mu2, z):
        rest = 1.0 - p.u1 - p.u2
        jump2 += p.mass * (_freq_jump(r, p.u1, p.u2) ** n - rn + r * p.u2 / rest * fp)
    jump2 *= (1.0 - r) * z
    jump3 = 0.0
    for p in pushforward(params.nu, z):
        jump3 += p.mass * (_freq_jump(r, p.u1, p.u2) ** n - rn)
    return drift_part + diff_part + jump1 + jump2 + jump3
