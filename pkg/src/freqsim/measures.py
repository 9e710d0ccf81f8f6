"""Finite atomic jump measures and their frequency-space moment functionals.

A jump measure lives on R+^2 \\ {0}: each atom is a pair of offspring masses
(w1, w2) with a positive weight.  For a population at total size z, a jump w
moves the frequency of type 1 by an amount determined by the *relative* sizes

    u_i = w_i / (z + w1 + w2),        i = 1, 2,

so u1 + u2 < 1 always.  All the integral functionals of the frequency-space
generator reduce, for atomic measures, to finite weighted sums over pushed
atoms; this module computes them exactly (up to float rounding).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

__all__ = [
    "Atom",
    "JumpMeasure",
    "PushedAtom",
    "pushforward",
    "mean_component",
    "lambda_nk",
    "gamma_n",
    "vartheta_n",
    "sc_coefficient",
    "mc_coefficient",
    "sample_atom",
]


@dataclass(frozen=True)
class Atom:
    """One atom of a jump measure: offspring masses (w1, w2) and a weight."""

    w1: float
    w2: float
    mass: float

    def __post_init__(self) -> None:
        if not (self.w1 >= 0.0 and self.w2 >= 0.0):
            raise ValueError(f"atom coordinates must be nonnegative, got ({self.w1}, {self.w2})")
        if self.w1 + self.w2 <= 0.0:
            raise ValueError("atom must charge R+^2 minus the origin (w1 + w2 > 0)")
        if not self.mass > 0.0:
            raise ValueError(f"atom mass must be positive, got {self.mass}")
        for v in (self.w1, self.w2, self.mass):
            if not math.isfinite(v):
                raise ValueError("atom fields must be finite")


@dataclass(frozen=True)
class PushedAtom:
    """An atom mapped to frequency space: relative jump sizes and the weight."""

    u1: float
    u2: float
    mass: float


class JumpMeasure:
    """A finite atomic measure on R+^2 \\ {0}.

    Atoms on the axes (one coordinate zero) are permitted; the origin is not.
    The empty measure (no atoms) is the zero measure.
    """

    __slots__ = ("atoms",)

    def __init__(self, atoms: Iterable[Atom] | Iterable[tuple[float, float, float]] = ()):
        converted = []
        for a in atoms:
            if not isinstance(a, Atom):
                a = Atom(*a)
            converted.append(a)
        self.atoms: tuple[Atom, ...] = tuple(converted)

    @property
    def total_mass(self) -> float:
        return sum(a.mass for a in self.atoms)

    def __len__(self) -> int:
        return len(self.atoms)

    def __iter__(self):
        return iter(self.atoms)

    def __add__(self, other: "JumpMeasure") -> "JumpMeasure":
        """Sum of measures = concatenation of atom lists."""
        return JumpMeasure(self.atoms + other.atoms)

    def __eq__(self, other) -> bool:
        return isinstance(other, JumpMeasure) and self.atoms == other.atoms

    def __hash__(self) -> int:
        return hash(self.atoms)

    def __repr__(self) -> str:
        inside = ", ".join(f"({a.w1}, {a.w2}, {a.mass})" for a in self.atoms)
        return f"JumpMeasure([{inside}])"


def _require_z(z: float) -> None:
    if not (z > 0.0 and math.isfinite(z)):
        raise ValueError(f"population size z must be positive and finite, got {z}")


def pushforward(measure: JumpMeasure, z: float) -> list[PushedAtom]:
    """Map each atom (w1, w2) to relative sizes (u1, u2) at population size z.

    Masses are carried over unchanged, so total mass is conserved and
    u1 + u2 < 1 holds strictly for every pushed atom.
    """
    _require_z(z)
    out = []
    for a in measure:
        denom = z + a.w1 + a.w2
        out.append(PushedAtom(a.w1 / denom, a.w2 / denom, a.mass))
    return out


def mean_component(measure: JumpMeasure, i: int) -> float:
    """First moment of coordinate i under the measure: sum of mass * w_i."""
    if i not in (1, 2):
        raise ValueError(f"component index must be 1 or 2, got {i}")
    return sum(a.mass * (a.w1 if i == 1 else a.w2) for a in measure)


def lambda_nk(measure: JumpMeasure, z: float, n: int, k: int) -> float:
    """Down-jump moment: integral of u1^k (1 - u1 - u2)^(n-k) over pushed atoms.

    These weight the merger-type transitions of the dual block counting chain.
    Requires 1 <= k <= n.
    """
    if not (isinstance(n, int) and isinstance(k, int) and 1 <= k <= n):
        raise ValueError(f"need integers 1 <= k <= n, got n={n}, k={k}")
    total = 0.0
    for p in pushforward(measure, z):
        total += p.mass * p.u1 ** k * (1.0 - p.u1 - p.u2) ** (n - k)
    return total


def gamma_n(measure: JumpMeasure, z: float, n: int, which: int) -> float:
    """Compensated up-jump functional of order n.

    Integrand 1 - (1 - u1 - u2)^n - n * u_which / (1 - u1 - u2), integrated
    over the pushed measure.  `which` selects the coordinate whose linear
    compensation is subtracted (1 for the type-1 measure, 2 for type 2).
    Can be negative; only rate *differences* built from it must stay positive.
    """
    if which not in (1, 2):
        raise ValueError(f"which must be 1 or 2, got {which}")
    if not (isinstance(n, int) and n >= 1):
        raise ValueError(f"order n must be a positive integer, got {n}")
    total = 0.0
    for p in pushforward(measure, z):
        rest = 1.0 - p.u1 - p.u2
        u = p.u1 if which == 1 else p.u2
        total += p.mass * (1.0 - rest ** n - n * u / rest)
    return total


def vartheta_n(measure: JumpMeasure, z: float, n: int) -> float:
    """Killing functional of order n: integral of 1 - (1 - u2)^n, pushed.

    Nonnegative, nondecreasing in n, bounded by the total mass.
    """
    if not (isinstance(n, int) and n >= 1):
        raise ValueError(f"order n must be a positive integer, got {n}")
    total = 0.0
    for p in pushforward(measure, z):
        total += p.mass * (1.0 - (1.0 - p.u2) ** n)
    return total


def sc_coefficient(mu1: JumpMeasure, mu2: JumpMeasure, z: float) -> float:
    """Selection-like drift coefficient produced by reproduction jumps.

    Value of  -int w1 (w1+w2)/(z+w1+w2) mu1(dw) + int w2 (w1+w2)/(z+w1+w2) mu2(dw);
    the drift term itself is this coefficient times r (1 - r).
    """
    _require_z(z)
    total = 0.0
    for a in mu1:
        total -= a.mass * a.w1 * (a.w1 + a.w2) / (z + a.w1 + a.w2)
    for a in mu2:
        total += a.mass * a.w2 * (a.w1 + a.w2) / (z + a.w1 + a.w2)
    return total


def mc_coefficient(measure: JumpMeasure, z: float, which: int) -> float:
    """Cross-coordinate compensation coefficient.

    which=1: integral of z w2 / (z + w1 + w2) over the type-1 measure (the
    drift term is -r^2 times this); which=2: integral of z w1 / (z + w1 + w2)
    over the type-2 measure (the drift term is (1-r)^2 times this).
    """
    _require_z(z)
    if which not in (1, 2):
        raise ValueError(f"which must be 1 or 2, got {which}")
    total = 0.0
    for a in measure:
        w = a.w2 if which == 1 else a.w1
        total += a.mass * z * w / (z + a.w1 + a.w2)
    return total


def sample_atom(measure: JumpMeasure, u: float) -> Atom:
    """Pick an atom by cumulative mass from a uniform variate u in [0, 1).

    The atom with cumulative normalized mass bracket containing u is returned;
    atom order is the measure's construction order.
    """
    if not measure.atoms:
        raise ValueError("cannot sample from the empty measure")
    if not (0.0 <= u < 1.0):
        raise ValueError(f"u must lie in [0, 1), got {u}")
    target = u * measure.total_mass
    acc = 0.0
    for a in measure.atoms:
        acc += a.mass
        if target < acc:
            return a
    return measure.atoms[-1]


def atoms_as_arrays(measure: JumpMeasure) -> tuple[list[float], list[float], list[float]]:
    """Plain (w1, w2, mass) lists, convenience for array packing."""
    return (
        [a.w1 for a in measure],
        [a.w2 for a in measure],
        [a.mass for a in measure],
    )


def cumulative_fractions(measure: JumpMeasure) -> list[float]:
    """Cumulative normalized masses, ending at 1.0; empty for the zero measure."""
    total = measure.total_mass
    if total <= 0.0:
        return []
    out = []
    acc = 0.0
    for a in measure:
        acc += a.mass
        out.append(acc / total)
    if out:
        out[-1] = 1.0
    return out


def measure_from_triples(triples: Sequence[Sequence[float]]) -> JumpMeasure:
    """Build a measure from [w1, w2, mass] triples (the config file format)."""
    atoms = []
    for t in triples:
        if len(t) != 3:
            raise ValueError(f"each atom needs exactly [w1, w2, mass], got {t!r}")
        atoms.append(Atom(float(t[0]), float(t[1]), float(t[2])))
    return JumpMeasure(atoms)
