"""
Synthetic profiles and snapshot ensembles with known scaling-law parameters.

Random numbers come from the counter-based Philox4x64-10 generator. The
128-bit key is ``seed + (stream << 64)``, with one stream per moment order
(profiles) or per wall-normal plane (ensembles), so output does not depend
on generation order.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from .errors import ValidationError
from .fitting import PrefactorModel, ScalingExponents, exponent
from .moments import SnapshotEnsemble
from .types import Basis, FlowCase, MomentOrder, MomentProfile, WallNormalGrid

REFERENCE_SIGMAS = ScalingExponents(1.05, 1.08, 0.02)
REFERENCE_MODEL = PrefactorModel(0.9, 0.4, 0.3)
MAX_NOISE = 0.1


def stream(seed: int, stream_id: int) -> np.random.Generator:
    if not 0 <= seed < 2**64:
        raise ValidationError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return np.random.Generator(np.random.Philox(key=int(seed) + (int(stream_id) << 64)))


def _profile_stream(order: MomentOrder) -> int:
    return (1 << 32) | (order.n << 16) | order.m


def _plane_stream(plane: int) -> int:
    return (2 << 32) | plane


@dataclass(frozen=True)
class Noise:
    amplitude: float
    seed: int
    kind: str = "multiplicative"

    def __post_init__(self):
        if self.kind != "multiplicative":
            raise ValidationError(f"unsupported noise kind {self.kind!r}")
        if not 0.0 <= self.amplitude <= MAX_NOISE:
            raise ValidationError(f"noise amplitude must lie in [0, {MAX_NOISE}], got {self.amplitude}")


@dataclass(frozen=True, eq=False)
class SynthSpec:
    sig: ScalingExponents
    model: PrefactorModel
    centerline: Mapping
    case: FlowCase
    grid: WallNormalGrid = field(default_factory=WallNormalGrid.default_synthetic)
    noise: Noise | None = None

    def __post_init__(self):
        object.__setattr__(self, "centerline",
                           {MomentOrder.of(k): float(v) for k, v in dict(self.centerline).items()})
        for order in self.centerline:
            deficit = _clean_deficit(self, order) * (1 - (self.noise.amplitude if self.noise else 0.0))
            recovered = (self.centerline[order] - (self.centerline[order] - _scale(self.case, order) * deficit))
            pos = self.grid.points > 0
            if not np.all(recovered[pos] > 0):
                raise ValidationError(
                    f"centre-line value {self.centerline[order]!r} for order {order} does not leave a "
                    "positive recoverable deficit on the grid"
                )

    def to_dict(self) -> dict:
        return {
            "sigma1": self.sig.sigma1,
            "sigma2": self.sig.sigma2,
            "sigma_theta": self.sig.sigma_theta,
            "alpha_prime": self.model.alpha_prime,
            "beta_prime": self.model.beta_prime,
            "beta_prime_theta": self.model.beta_prime_theta,
            "centerline": [[o.n, o.m, v] for o, v in sorted(self.centerline.items())],
            "case": self.case.to_dict(),
            "noise": None if self.noise is None else
            {"kind": self.noise.kind, "amplitude": self.noise.amplitude, "seed": self.noise.seed},
        }

    @classmethod
    def from_dict(cls, d: dict, grid: WallNormalGrid | None = None) -> "SynthSpec":
        case = {k: v for k, v in d["case"].items() if k != "pe_tau"}
        noise = d.get("noise")
        return cls(
            ScalingExponents(d["sigma1"], d["sigma2"], d["sigma_theta"]),
            PrefactorModel(d["alpha_prime"], d["beta_prime"], d["beta_prime_theta"]),
            {(int(n), int(m)): v for n, m, v in d["centerline"]},
            FlowCase(**case),
            grid if grid is not None else WallNormalGrid.default_synthetic(),
            None if noise is None else Noise(noise["amplitude"], int(noise["seed"]), noise.get("kind", "multiplicative")),
        )


def _scale(case: FlowCase, order: MomentOrder) -> float:
    return case.u_tau**order.n * case.theta_tau**order.m


def _clean_deficit(spec: SynthSpec, order: MomentOrder) -> np.ndarray:
    x = spec.grid.points
    out = np.zeros_like(x)
    pos = x > 0
    out[pos] = spec.model.prefactor(order) * x[pos] ** exponent(order, spec.sig)
    return out


def default_orders(max_pure=7, max_mixed=6) -> list[MomentOrder]:
    orders = [MomentOrder(n, 0) for n in range(1, max_pure + 1)]
    orders += [MomentOrder(0, m) for m in range(1, max_pure + 1)]
    orders += [MomentOrder(n, t - n) for t in range(2, max_mixed + 1) for n in range(1, t)]
    return orders


def generate_profiles(spec: SynthSpec, orders: Iterable) -> dict[MomentOrder, MomentProfile]:
    """Instantaneous profiles ``H_cl - u_tau^n theta_tau^m C' x^e``.

    With noise, the deficit term is multiplied by ``1 + amplitude * u`` with
    ``u`` uniform on [-1, 1]; the centre-line value stays exact.
    """
    orders = [MomentOrder.of(o) for o in orders]
    if not orders:
        raise ValidationError("generate_profiles needs at least one order")
    missing = [str(o) for o in orders if o not in spec.centerline]
    if missing:
        raise ValidationError(f"no centre-line value for orders {missing}")
    out = {}
    for order in orders:
        deficit = _clean_deficit(spec, order)
        if spec.noise is not None and spec.noise.amplitude > 0:
            u = 2.0 * stream(spec.noise.seed, _profile_stream(order)).random(deficit.size) - 1.0
            deficit = deficit * (1.0 + spec.noise.amplitude * u)
        values = spec.centerline[order] - _scale(spec.case, order) * deficit
        out[order] = MomentProfile(order, spec.grid, values, Basis.INSTANTANEOUS, spec.case,
                                   meta={"synth": spec.to_dict()})
    return out


def reference_spec(grid=None, noise: Noise | None = None, case: FlowCase | None = None,
                   orders=None, sig: ScalingExponents = REFERENCE_SIGMAS,
                   model: PrefactorModel = REFERENCE_MODEL) -> SynthSpec:
    """Fixture spec; centre-line values are twice the largest deficit on the grid."""
    grid = grid if grid is not None else WallNormalGrid.default_synthetic()
    case = case if case is not None else FlowCase(2000.0, 7.0)
    orders = orders if orders is not None else default_orders()
    x = grid.points[grid.points > 0]
    centre = {}
    for o in map(MomentOrder.of, orders):
        peak = model.prefactor(o) * np.max(x ** exponent(o, sig))
        centre[o] = 2.0 * _scale(case, o) * peak
    return SynthSpec(sig, model, centre, case, grid, noise)


def _plane_means(spec: SynthSpec) -> tuple[np.ndarray, np.ndarray]:
    for o in (MomentOrder(1, 0), MomentOrder(0, 1)):
        if o not in spec.centerline:
            raise ValidationError(f"ensemble generation needs a centre-line value for {o}")
    mu = spec.centerline[MomentOrder(1, 0)] - spec.case.u_tau * _clean_deficit(spec, MomentOrder(1, 0))
    mt = spec.centerline[MomentOrder(0, 1)] - spec.case.theta_tau * _clean_deficit(spec, MomentOrder(0, 1))
    return mu, mt


def generate_ensemble(spec: SynthSpec, shape, n_snapshots: int, *, spread=0.1, rho=0.5,
                      seed: int | None = None) -> SnapshotEnsemble:
    """Snapshots of shifted log-normal ``(U1, Theta)`` pairs, i.i.d. within each plane.

    ``U1 = mean_u + u_tau (exp(s Z1 - s^2/2) - 1)`` and likewise for Theta with
    ``corr(Z1, Z2) = rho``; plane means follow the noise-free (1,0) and (0,1)
    laws. See :func:`ensemble_moment` for the exact moments.
    """
    n1, n2, n3 = (int(v) for v in shape)
    if n1 < 2 or n3 < 2:
        raise ValidationError(f"n1 and n3 must be at least 2, got shape {shape}")
    if n2 != len(spec.grid):
        raise ValidationError(f"n2={n2} does not match the grid length {len(spec.grid)}")
    if n_snapshots < 1:
        raise ValidationError("n_snapshots must be at least 1")
    if not (spread >= 0 and -1 <= rho <= 1):
        raise ValidationError("spread must be >= 0 and rho in [-1, 1]")
    if seed is None:
        seed = spec.noise.seed if spec.noise is not None else 0
    mu, mt = _plane_means(spec)
    u1 = np.empty((n_snapshots, n1, n2, n3))
    th = np.empty_like(u1)
    tail = math.sqrt(max(0.0, 1.0 - rho * rho))
    for j in range(n2):
        z = stream(seed, _plane_stream(j)).standard_normal((2, n_snapshots, n1, n3))
        z2 = rho * z[0] + tail * z[1]
        u1[:, :, j, :] = mu[j] + spec.case.u_tau * np.expm1(spread * z[0] - 0.5 * spread**2)
        th[:, :, j, :] = mt[j] + spec.case.theta_tau * np.expm1(spread * z2 - 0.5 * spread**2)
    return SnapshotEnsemble(u1, th, spec.grid, spec.case,
                            meta={"synth": spec.to_dict(), "spread": spread, "rho": rho, "seed": seed})


def ensemble_moment(spec: SynthSpec, order, *, spread=0.1, rho=0.5) -> np.ndarray:
    """Exact plane moments ``E[U1^n Theta^m]`` of :func:`generate_ensemble`."""
    order = MomentOrder.of(order)
    mu, mt = _plane_means(spec)
    bu, bt = spec.case.u_tau, spec.case.theta_tau
    au, at = mu - bu, mt - bt
    s2 = spread * spread
    total = np.zeros_like(mu)
    for j in range(order.n + 1):
        for k in range(order.m + 1):
            # E[L1^j L2^k] for L = exp(s Z - s^2/2)
            lognormal = math.exp(0.5 * s2 * (j * j + k * k + 2 * rho * j * k) - 0.5 * s2 * (j + k))
            coef = math.comb(order.n, j) * math.comb(order.m, k) * bu**j * bt**k * lognormal
            total = total + coef * au ** (order.n - j) * at ** (order.m - k)
    return total
