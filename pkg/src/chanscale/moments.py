"""
One-point moments of streamwise velocity and temperature.

Instantaneous moments ``H_{n,m} = <U1^n Theta^m>`` are averaged over the
homogeneous directions (x1, x3) and over snapshots. Central moments
``R_{n,m} = <u^n theta^m>`` of the fluctuations are related to them by a
binomial expansion around the plane means.
"""
from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import NumericalError, ValidationError
from .types import Basis, FlowCase, MomentOrder, MomentProfile, WallNormalGrid

CENTRE_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class SnapshotEnsemble:
    """Instantaneous U1 and Theta fields.

    ``u1`` and ``theta`` have shape ``(n_snapshots, n1, n2, n3)``.
    """

    u1: np.ndarray
    theta: np.ndarray
    grid: WallNormalGrid
    case: FlowCase
    meta: Mapping = field(default_factory=dict)

    def __post_init__(self):
        u1 = np.array(self.u1, dtype=float)
        theta = np.array(self.theta, dtype=float)
        if u1.ndim != 4 or theta.shape != u1.shape:
            raise ValidationError(
                f"u1 and theta must share a 4-d shape (snapshots, n1, n2, n3); got {u1.shape} and {theta.shape}"
            )
        if u1.shape[0] < 1:
            raise ValidationError("ensemble has no snapshots")
        if u1.shape[2] != len(self.grid):
            raise ValidationError(f"n2={u1.shape[2]} does not match grid length {len(self.grid)}")
        if not np.all(np.isfinite(theta)):
            raise ValidationError("theta contains non-finite values")
        if np.any(theta <= 0):
            warnings.warn("theta has non-positive values; a transformed (positive) temperature is expected",
                          stacklevel=2)
        u1.setflags(write=False)
        theta.setflags(write=False)
        object.__setattr__(self, "u1", u1)
        object.__setattr__(self, "theta", theta)

    @property
    def shape(self) -> tuple[int, int, int]:
        return tuple(self.u1.shape[1:])

    @property
    def n_snapshots(self) -> int:
        return self.u1.shape[0]


def pairwise_sum(a: np.ndarray) -> np.ndarray:
    """Sum over the last axis with a fixed balanced tree.

    The tree shape depends only on the length, so results are reproducible
    bit for bit and the rounding error grows like log(N).
    """
    a = np.asarray(a, dtype=float)
    while a.shape[-1] > 1:
        k = a.shape[-1]
        half = k // 2
        head = a[..., : 2 * half]
        paired = head[..., 0::2] + head[..., 1::2]
        if k % 2:
            paired = np.concatenate((paired, a[..., -1:]), axis=-1)
        a = paired
    return a[..., 0]


def compute_moment(ensemble: SnapshotEnsemble, order) -> MomentProfile:
    order = MomentOrder.of(order)
    if ensemble.n_snapshots < 1:
        raise ValidationError("cannot compute moments of an empty ensemble")
    n, m = order.n, order.m
    per_snapshot = []
    for s in range(ensemble.n_snapshots):
        # (n2, n1*n3) so the reduction runs over the homogeneous directions
        u = np.moveaxis(ensemble.u1[s], 1, 0).reshape(len(ensemble.grid), -1)
        t = np.moveaxis(ensemble.theta[s], 1, 0).reshape(len(ensemble.grid), -1)
        with np.errstate(over="ignore", invalid="ignore"):
            if m == 0:
                prod = u**n
            elif n == 0:
                prod = t**m
            else:
                prod = u**n * t**m
            per_snapshot.append(pairwise_sum(prod))
    with np.errstate(over="ignore", invalid="ignore"):
        total = pairwise_sum(np.stack(per_snapshot, axis=-1))
        count = ensemble.n_snapshots * ensemble.shape[0] * ensemble.shape[2]
        values = total / count
    bad = np.nonzero(~np.isfinite(values))[0]
    if bad.size:
        raise NumericalError(f"moment {order} is non-finite at plane index {int(bad[0])}")
    return MomentProfile(order, ensemble.grid, values, Basis.INSTANTANEOUS, ensemble.case)


def _required(order: MomentOrder, skip_first=True):
    for j in range(order.n + 1):
        for k in range(order.m + 1):
            if j + k == 0:
                continue
            if skip_first and j + k == 1:
                continue
            yield (j, k)


def _lookup(moments: Mapping, key):
    for cand in (key, MomentOrder(*key)):
        if cand in moments:
            return moments[cand]
    return None


def _fsum_columns(terms: list[np.ndarray]) -> np.ndarray:
    stacked = np.stack(terms)
    return np.array([math.fsum(col) for col in stacked.T])


def h_from_r(mean_profiles: Sequence, central_moments: Mapping, order) -> MomentProfile:
    """Raw moment ``H_{n,m}`` from plane means and central moments.

    ``mean_profiles`` is ``(U_mean, Theta_mean)``; either may be ``None`` if
    the corresponding power is zero. ``central_moments`` maps orders (tuples
    or :class:`MomentOrder`) to fluctuation-basis profiles.
    """
    order = MomentOrder.of(order)
    u_mean, t_mean = mean_profiles
    missing = [jk for jk in _required(order) if _lookup(central_moments, jk) is None]
    if order.n and u_mean is None:
        missing.insert(0, (1, 0))
    if order.m and t_mean is None:
        missing.insert(0, (0, 1))
    if missing:
        raise ValidationError(f"h_from_r{order}: missing central moments for (j,k) = {missing}")
    ref = u_mean if u_mean is not None else t_mean
    ub = np.asarray(u_mean.values) if u_mean is not None else np.zeros(len(ref.grid))
    tb = np.asarray(t_mean.values) if t_mean is not None else np.zeros(len(ref.grid))
    terms = []
    for j in range(order.n + 1):
        for k in range(order.m + 1):
            if j + k == 0:
                r = np.ones_like(ub)
            elif j + k == 1:
                continue
            else:
                r = np.asarray(_lookup(central_moments, (j, k)).values)
            coef = math.comb(order.n, j) * math.comb(order.m, k)
            terms.append(coef * ub ** (order.n - j) * tb ** (order.m - k) * r)
    return MomentProfile(order, ref.grid, _fsum_columns(terms), Basis.INSTANTANEOUS, ref.case)


def r_from_h(h_moments: Mapping, order) -> MomentProfile:
    """Central moment ``R_{n,m}`` from raw moments, using ``H_{1,0}`` and ``H_{0,1}`` as means."""
    order = MomentOrder.of(order)
    missing = [jk for jk in _required(order, skip_first=False) if _lookup(h_moments, jk) is None]
    if missing:
        raise ValidationError(f"r_from_h{order}: missing raw moments for (j,k) = {missing}")
    ref = _lookup(h_moments, (1, 0) if order.n else (0, 1))
    ub = np.asarray(ref.values) if order.n else 0.0
    tb = np.asarray(_lookup(h_moments, (0, 1)).values) if order.m else 0.0
    npts = len(ref.grid)
    terms = []
    for j in range(order.n + 1):
        for k in range(order.m + 1):
            hv = np.ones(npts) if j + k == 0 else np.asarray(_lookup(h_moments, (j, k)).values)
            coef = math.comb(order.n, j) * math.comb(order.m, k)
            terms.append(coef * (-ub) ** (order.n - j) * (-tb) ** (order.m - k) * hv)
    return MomentProfile(order, ref.grid, _fsum_columns(terms), Basis.FLUCTUATION, ref.case)


class CenterlinePolicy(str, enum.Enum):
    CENTER_POINT = "center"
    SYMMETRIC_AVERAGE = "symmetric"


def centerline_value(profile: MomentProfile, policy=CenterlinePolicy.CENTER_POINT) -> float:
    policy = CenterlinePolicy(policy)
    x = profile.x
    if x[0] <= CENTRE_TOL:
        return float(profile.values[0])
    if policy is CenterlinePolicy.SYMMETRIC_AVERAGE and len(x) >= 2:
        # grid straddles the centre: the two innermost points came from opposite halves
        return float(0.5 * (profile.values[0] + profile.values[1]))
    raise ValidationError(
        f"profile {profile.order}: no centre point (first x2/h = {x[0]!r}); "
        "use the symmetric centre-line policy for grids that straddle the centre"
    )


def to_deficit(profile: MomentProfile, centerline_policy=CenterlinePolicy.CENTER_POINT) -> MomentProfile:
    """``(H_cl - H) / (u_tau^n theta_tau^m)``."""
    if profile.basis is not Basis.INSTANTANEOUS:
        raise ValidationError(f"to_deficit needs an instantaneous-basis profile, got {profile.basis.value}")
    h_cl = centerline_value(profile, centerline_policy)
    scale = profile.case.u_tau ** profile.order.n * profile.case.theta_tau ** profile.order.m
    values = (h_cl - profile.values) / scale
    meta = dict(profile.meta)
    meta.update(h_cl=h_cl, centerline_policy=CenterlinePolicy(centerline_policy).value)
    return profile.replace(values=values, basis=Basis.DEFICIT, meta=meta)
