"""
Term structure of the multi-point correlation (MPC) equations and the
scaling/translation symmetry group acting on moment profiles.

Only the structure is represented: which terms appear, at which point of
application, with which coefficient and correlation object. Nothing here
evaluates derivatives.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .errors import NumericalError, ValidationError
from .types import Basis, MomentOrder, MomentProfile, WallNormalGrid


class TermKind(str, enum.Enum):
    TIME_DERIVATIVE = "time_derivative"
    CONVECTIVE = "convective"
    PRESSURE_GRADIENT = "pressure_gradient"
    VISCOUS_DIFFUSION = "viscous_diffusion"
    THERMAL_DIFFUSION = "thermal_diffusion"


class Coefficient(str, enum.Enum):
    ONE = "1"
    MINUS_NU = "-nu"
    MINUS_ALPHA = "-alpha"


@dataclass(frozen=True)
class Correlation:
    """Symbolic correlation object.

    ``symbol`` is ``"H"`` (velocity/temperature only) or ``"I"`` (one
    velocity replaced by pressure at ``pressure_slot``). ``substitution``
    is ``(index, point)``: the velocity of point ``index`` is renamed to
    ``k`` and moved to point ``point``.
    """

    symbol: str
    velocities: int
    temperatures: int
    pressure_slot: int | None = None
    substitution: tuple[int, int] | None = None

    def label(self) -> str:
        if self.symbol == "I":
            body = f"I_i{{{self.velocities}}}Θ{{{self.temperatures}}}[{self.pressure_slot}]_P"
        else:
            body = f"H_i{{{self.velocities}}}Θ{{{self.temperatures}}}"
        if self.substitution:
            src, dst = self.substitution
            body += f"[i({src})→k](x({src})→x({dst}))"
        return body


@dataclass(frozen=True)
class MpcTerm:
    kind: TermKind
    applied_point: int
    coefficient: Coefficient
    correlation: Correlation
    derivative: str

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "applied_point": self.applied_point,
            "coefficient": self.coefficient.value,
            "correlation": self.correlation.label(),
            "derivative": self.derivative,
        }


def enumerate_mpc_terms(order) -> list[MpcTerm]:
    """All terms of the MPC equation for ``H_{n,m}``; there are ``1 + 3n + 2m``."""
    order = MomentOrder.of(order)
    n, m = order.n, order.m
    base = Correlation("H", n, m)
    extra = n + m + 1
    terms = [MpcTerm(TermKind.TIME_DERIVATIVE, 0, Coefficient.ONE, base, "d/dt")]
    for a in range(1, n + 1):
        terms += [
            MpcTerm(TermKind.CONVECTIVE, a, Coefficient.ONE,
                    Correlation("H", n + 1, m, substitution=(extra, a)), f"d/dx_k({a})"),
            MpcTerm(TermKind.PRESSURE_GRADIENT, a, Coefficient.ONE,
                    Correlation("I", n - 1, m, pressure_slot=a), f"d/dx_i({a})"),
            MpcTerm(TermKind.VISCOUS_DIFFUSION, a, Coefficient.MINUS_NU, base,
                    f"d2/dx_k({a})dx_k({a})"),
        ]
    for b in range(n + 1, n + m + 1):
        terms += [
            MpcTerm(TermKind.CONVECTIVE, b, Coefficient.ONE,
                    Correlation("H", n + 1, m, substitution=(extra, b)), f"d/dx_k({b})"),
            MpcTerm(TermKind.THERMAL_DIFFUSION, b, Coefficient.MINUS_ALPHA, base,
                    f"d2/dx_k({b})dx_k({b})"),
        ]
    return terms


def continuity_pairs(order) -> tuple[list[int], list[tuple[int, int]]]:
    """Points ``l`` of the velocity continuity relations and ``(a, l)`` pairs of the pressure ones.

    Temperature points never carry a continuity relation.
    """
    n = order[0] if isinstance(order, tuple) else MomentOrder.of(order).n
    first = list(range(1, n + 1))
    second = [(a, l) for a in first for l in first if a != l] if n >= 2 else []
    return first, second


def count_continuity_relations(order) -> tuple[int, int]:
    first, second = continuity_pairs(order)
    return len(first), len(second)


def term_summary(order) -> dict:
    order = MomentOrder.of(order)
    terms = enumerate_mpc_terms(order)
    counts = {k.value: 0 for k in TermKind}
    for t in terms:
        counts[t.kind.value] += 1
    c1, c2 = count_continuity_relations(order)
    return {
        "n": order.n,
        "m": order.m,
        "n_terms": len(terms),
        "counts": counts,
        "continuity": {"velocity": c1, "pressure": c2},
        "terms": [t.to_dict() for t in terms],
    }


@dataclass(frozen=True)
class SymmetryParams:
    """Group parameters of the combined scaling/translation symmetry.

    ``a_h`` maps moment orders to the moment-translation constants; absent
    orders translate by zero.
    """

    a_sx: float = 0.0
    a_st: float = 0.0
    a_theta: float = 0.0
    a_ss: float = 0.0
    a_x: tuple[float, float, float] = (0.0, 0.0, 0.0)
    a_h: Mapping = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "a_x", tuple(float(v) for v in self.a_x))
        if len(self.a_x) != 3:
            raise ValidationError("a_x must have three components")
        object.__setattr__(self, "a_h", {MomentOrder.of(k): float(v) for k, v in dict(self.a_h).items()})

    def translation(self, order) -> float:
        return self.a_h.get(MomentOrder.of(order), 0.0)

    def exponent(self, order) -> float:
        """Logarithmic value scaling ``n(a_sx - a_st) + m a_theta + a_ss``."""
        n, m = (order.n, order.m) if isinstance(order, MomentOrder) else order
        return n * (self.a_sx - self.a_st) + m * self.a_theta + self.a_ss

    def scaled(self, eps: float) -> "SymmetryParams":
        return SymmetryParams(eps * self.a_sx, eps * self.a_st, eps * self.a_theta, eps * self.a_ss,
                              tuple(eps * v for v in self.a_x), {k: eps * v for k, v in self.a_h.items()})

    def then(self, other: "SymmetryParams") -> "SymmetryParams":
        """Parameters of applying ``self`` first and ``other`` second.

        Scalings add; translations are carried through the second scaling
        (scale first, then translate).
        """
        sx2 = math.exp(other.a_sx)
        a_x = tuple(sx2 * t1 + t2 for t1, t2 in zip(self.a_x, other.a_x))
        keys = set(self.a_h) | set(other.a_h)
        a_h = {k: math.exp(other.exponent(k)) * self.translation(k) + other.translation(k) for k in keys}
        return SymmetryParams(self.a_sx + other.a_sx, self.a_st + other.a_st,
                              self.a_theta + other.a_theta, self.a_ss + other.a_ss, a_x, a_h)


def apply_symmetry(profile: MomentProfile, params: SymmetryParams) -> MomentProfile:
    """Map the grid by ``e^{a_sx} x2 + a_x[2]`` and values by ``e^{k} H + a_h``."""
    if profile.basis is not Basis.INSTANTANEOUS:
        raise ValidationError(f"symmetries act on instantaneous moments, got {profile.basis.value}")
    stretch = math.exp(params.a_sx)
    shift = params.a_x[1]
    lo, hi = profile.grid.domain
    x_new = stretch * profile.x + shift
    if np.any(np.diff(x_new) <= 0):
        raise NumericalError("transformed grid is not strictly increasing")
    grid = WallNormalGrid(x_new, domain=(min(stretch * lo + shift, x_new[0]), max(stretch * hi + shift, x_new[-1])))
    factor = math.exp(params.exponent(profile.order))
    values = factor * profile.values + params.translation(profile.order)
    meta = dict(profile.meta)
    meta["domain"] = list(grid.domain)
    return profile.replace(grid=grid, values=values, meta=meta)


def infinitesimal_generator(order, params: SymmetryParams, t: float, x, h_value: float):
    """``(xi_t, xi_x, eta_H)`` of the group at a point."""
    x = np.asarray(x, dtype=float)
    xi_t = params.a_st * t
    xi_x = params.a_sx * x + np.asarray(params.a_x)
    eta_h = params.exponent(MomentOrder.of(order)) * h_value + params.translation(order)
    return xi_t, xi_x, eta_h
