"""
Shared domain types: flow cases, moment orders, wall-normal grids and profiles.

Coordinates follow the centre-anchored convention throughout: ``x2/h = 0`` is
the channel centre line and ``x2/h = 1`` is the wall.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Any, Mapping

import numpy as np

from .errors import ValidationError

MIN_FIT_POINTS = 8


def _readonly(values, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class FlowCase:
    re_tau: float
    pr: float
    u_tau: float = 1.0
    theta_tau: float = 1.0
    h: float = 1.0
    pe_tau: float = field(init=False)

    def __post_init__(self):
        for name in ("re_tau", "pr", "u_tau", "theta_tau", "h"):
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
                raise ValidationError(f"FlowCase.{name} must be a finite positive number, got {value!r}")
            object.__setattr__(self, name, float(value))
        object.__setattr__(self, "pe_tau", self.re_tau * self.pr)

    def to_dict(self) -> dict[str, float]:
        return {
            "re_tau": self.re_tau,
            "pr": self.pr,
            "pe_tau": self.pe_tau,
            "u_tau": self.u_tau,
            "theta_tau": self.theta_tau,
            "h": self.h,
        }


def make_flow_case(re_tau, pr, u_tau=1.0, theta_tau=1.0, h=1.0) -> FlowCase:
    return FlowCase(re_tau=re_tau, pr=pr, u_tau=u_tau, theta_tau=theta_tau, h=h)


@dataclass(frozen=True, order=True)
class MomentOrder:
    """Velocity power ``n`` and temperature power ``m`` of a mixed moment."""

    n: int
    m: int

    def __post_init__(self):
        for name in ("n", "m"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, np.integer)) or value < 0:
                raise ValidationError(f"MomentOrder.{name} must be a non-negative integer, got {value!r}")
            object.__setattr__(self, name, int(value))
        if self.n + self.m < 1:
            raise ValidationError("MomentOrder requires n + m >= 1")

    @classmethod
    def of(cls, order) -> "MomentOrder":
        if isinstance(order, MomentOrder):
            return order
        n, m = order
        return cls(n, m)

    @property
    def total(self) -> int:
        return self.n + self.m

    @property
    def is_velocity(self) -> bool:
        return self.m == 0

    @property
    def is_temperature(self) -> bool:
        return self.n == 0

    @property
    def is_mixed(self) -> bool:
        return self.n > 0 and self.m > 0

    def __str__(self):
        return f"({self.n},{self.m})"


class Basis(str, enum.Enum):
    INSTANTANEOUS = "instantaneous"
    FLUCTUATION = "fluctuation"
    DEFICIT = "deficit"


@dataclass(frozen=True, eq=False)
class WallNormalGrid:
    """Strictly increasing ``x2/h`` points, centre-anchored.

    ``domain`` is normally ``(0, 1)``; symmetry transformations may map the
    grid elsewhere and record the image of the channel half here.
    """

    points: np.ndarray
    orientation: str = "centre"
    domain: tuple[float, float] = (0.0, 1.0)

    def __post_init__(self):
        pts = _readonly(self.points)
        if pts.ndim != 1 or pts.size == 0:
            raise ValidationError("grid must be a non-empty 1-d sequence")
        if not np.all(np.isfinite(pts)):
            raise ValidationError("grid contains non-finite values")
        bad = np.nonzero(np.diff(pts) <= 0)[0]
        if bad.size:
            i = int(bad[0])
            raise ValidationError(
                f"grid must be strictly increasing: x[{i}]={pts[i]!r} >= x[{i + 1}]={pts[i + 1]!r}"
            )
        lo, hi = (float(v) for v in self.domain)
        if pts[0] < lo or pts[-1] > hi:
            raise ValidationError(f"grid values must lie in [{lo}, {hi}], got [{pts[0]}, {pts[-1]}]")
        if self.orientation != "centre":
            raise ValidationError("stored grids are always centre-anchored")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "domain", (lo, hi))

    def __len__(self):
        return self.points.size

    @classmethod
    def default_synthetic(cls) -> "WallNormalGrid":
        """Centre point plus 97 log-spaced points in (0.005, 1]."""
        return cls(np.concatenate(([0.0], np.geomspace(0.005, 1.0, 98)[1:])))

    @classmethod
    def from_physical(cls, x2, h) -> "WallNormalGrid":
        return cls(np.asarray(x2, dtype=float) / h)


@dataclass(frozen=True, eq=False)
class MomentProfile:
    order: MomentOrder
    grid: WallNormalGrid
    values: np.ndarray
    basis: Basis
    case: FlowCase
    meta: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "order", MomentOrder.of(self.order))
        object.__setattr__(self, "basis", Basis(self.basis))
        vals = _readonly(self.values)
        if vals.ndim != 1 or vals.size != len(self.grid):
            raise ValidationError(
                f"profile {self.order}: {vals.size} values for a grid of {len(self.grid)} points"
            )
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "meta", MappingProxyType(dict(self.meta)))

    @property
    def x(self) -> np.ndarray:
        return self.grid.points

    def replace(self, **changes) -> "MomentProfile":
        kw = dict(order=self.order, grid=self.grid, values=self.values, basis=self.basis,
                  case=self.case, meta=dict(self.meta))
        kw.update(changes)
        return MomentProfile(**kw)
