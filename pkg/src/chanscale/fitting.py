"""
Minimax fitting of deficit power laws.

Every moment deficit is modelled as ``C'_{nm} (x2/h)^e_{nm}`` with

    e_{nm} = n (sigma2 - sigma1) + m sigma_theta + 2 sigma1 - sigma2
    C'_{nm} = alpha' exp(n beta' + m beta'_theta)

and parameters are chosen to minimise the largest relative error
``|(data - fit) / data|`` over the fit range.

For a fixed exponent the relative error of point ``i`` is ``|1 - C / q_i|``
with ``q_i = d_i / x_i^e``. The optimal prefactor equioscillates between the
extreme ``q`` values, which gives the harmonic mean
``C = 2 q_min q_max / (q_min + q_max)`` and the error ``tanh(s / 2)`` where
``s = log q_max - log q_min``. The spread ``s(e)`` is a maximum of affine
functions of ``e`` and therefore convex, which the golden-section polish
relies on.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.optimize import minimize, minimize_scalar

from .errors import NumericalError, ValidationError
from .types import MIN_FIT_POINTS, Basis, MomentOrder, MomentProfile, WallNormalGrid

DEFAULT_RANGE = (0.0, 0.75)
GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
PREFACTOR_ORDERS = (MomentOrder(1, 0), MomentOrder(2, 0), MomentOrder(0, 1), MomentOrder(0, 2), MomentOrder(1, 1))


@dataclass(frozen=True)
class ScalingExponents:
    sigma1: float
    sigma2: float
    sigma_theta: float

    def as_tuple(self):
        return (self.sigma1, self.sigma2, self.sigma_theta)


@dataclass(frozen=True)
class PowerLawFit:
    order: MomentOrder
    exponent: float
    prefactor: float
    fit_range: tuple[float, float]
    max_rel_error: float
    n_points: int
    constrained: bool = False
    shift: float = 0.0

    def __post_init__(self):
        if not self.prefactor > 0:
            raise NumericalError(f"fit {self.order}: prefactor must be positive, got {self.prefactor!r}")
        if not self.max_rel_error >= 0:
            raise NumericalError(f"fit {self.order}: invalid max relative error {self.max_rel_error!r}")

    def evaluate(self, x) -> np.ndarray:
        return self.prefactor * (np.asarray(x, dtype=float) + self.shift) ** self.exponent

    def to_dict(self) -> dict:
        return {
            "n": self.order.n,
            "m": self.order.m,
            "exponent": self.exponent,
            "prefactor": self.prefactor,
            "max_rel_error": self.max_rel_error,
            "range": list(self.fit_range),
            "n_points": self.n_points,
            "constrained": self.constrained,
            "shift": self.shift,
        }


@dataclass(frozen=True)
class PrefactorModel:
    alpha_prime: float
    beta_prime: float
    beta_prime_theta: float
    max_rel_error: float | None = field(default=None, compare=False)

    def __post_init__(self):
        if not self.alpha_prime > 0:
            raise ValidationError(f"alpha' must be positive, got {self.alpha_prime!r}")

    def prefactor(self, order) -> float:
        n, m = _nm(order)
        return self.alpha_prime * math.exp(n * self.beta_prime + m * self.beta_prime_theta)


def _nm(order):
    if isinstance(order, MomentOrder):
        return order.n, order.m
    n, m = order
    return int(n), int(m)


def exponent(order, sig: ScalingExponents) -> float:
    """Deficit exponent of order ``(n, m)``; ``(0, 0)`` is accepted for diagnostics."""
    n, m = _nm(order)
    # grouped as (n-1) sigma2 + (2-n) sigma1 so orders (1,0) and (2,0) return sigma1 and sigma2 exactly
    return ((n - 1) * sig.sigma2 + (2 - n) * sig.sigma1) + m * sig.sigma_theta


def rel_error(data, fit) -> float:
    data = np.asarray(data, dtype=float)
    return float(np.max(np.abs((data - fit) / data)))


def _select(deficit: MomentProfile, fit_range, drop_nonpositive: bool):
    if deficit.basis is not Basis.DEFICIT:
        raise ValidationError(f"fit {deficit.order}: expected a deficit-basis profile, got {deficit.basis.value}")
    x_lo, x_hi = (float(v) for v in fit_range)
    if not (0.0 <= x_lo < x_hi):
        raise ValidationError(f"fit {deficit.order}: invalid range ({x_lo}, {x_hi}]")
    x, d = deficit.x, deficit.values
    mask = (x > x_lo) & (x <= x_hi) & (x > 0)
    bad = mask & ~(d > 0)
    if np.any(bad):
        if not drop_nonpositive:
            pts = ", ".join(f"x2/h={float(xi)!r}: {float(di)!r}" for xi, di in zip(x[bad][:10], d[bad][:10]))
            raise ValidationError(
                f"fit {deficit.order}: {int(bad.sum())} non-positive deficit value(s) in range: {pts}"
            )
        mask &= ~bad
    if int(mask.sum()) < MIN_FIT_POINTS:
        raise ValidationError(
            f"fit {deficit.order}: {int(mask.sum())} usable points in ({x_lo}, {x_hi}], need {MIN_FIT_POINTS}"
        )
    return x[mask], d[mask]


def _spread(lx, ld, e) -> float:
    lq = ld - e * lx
    return float(lq.max() - lq.min())


def _best_prefactor(lx, ld, e) -> tuple[float, float]:
    """Minimax prefactor for a fixed exponent and the resulting relative error."""
    lq = ld - e * lx
    hi, lo = lq.max(), lq.min()
    half = 0.5 * (hi - lo)
    return math.exp(0.5 * (hi + lo)) / math.cosh(half), math.tanh(half)


def _golden(f, a, b, tol=1e-15, maxiter=400):
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(maxiter):
        if abs(b - a) <= tol * max(1.0, abs(a) + abs(b)):
            break
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = f(d)
    return c if fc <= fd else d


def _bracket(f, x0, width):
    """Interval around the minimum of a convex ``f`` starting from ``x0``."""
    f0 = f(x0)
    lo, hi = x0 - width, x0 + width
    step = width
    for _ in range(200):
        if f(lo) > f0:
            break
        step *= 2
        lo = x0 - step
    step = width
    for _ in range(200):
        if f(hi) > f0:
            break
        step *= 2
        hi = x0 + step
    return lo, hi


def _minimax_exponent(lx, ld):
    # least squares seed in log space
    slope, intercept = np.polyfit(lx, ld, 1)

    def objective(p):
        return float(np.max(np.abs(1.0 - np.exp(p[1] + p[0] * lx - ld))))

    res = minimize(objective, x0=np.array([slope, intercept]), method="Nelder-Mead",
                   options={"xatol": 1e-12, "fatol": 1e-15, "maxiter": 4000, "maxfev": 8000})
    e_nm = float(res.x[0]) if np.all(np.isfinite(res.x)) else float(slope)
    f = lambda e: _spread(lx, ld, e)  # noqa: E731
    width = max(1e-3, 4.0 * abs(e_nm - slope))
    lo, hi = _bracket(f, e_nm, width)
    e_best = _golden(f, lo, hi)
    if f(e_nm) < f(e_best):
        e_best = e_nm
    return e_best


def fit_power_law(deficit: MomentProfile, fit_range=DEFAULT_RANGE, *, drop_nonpositive=False,
                  fit_shift=False) -> PowerLawFit:
    """Fit ``C x^e`` minimising the L-infinity relative error.

    The centre point and everything at or below ``x_lo`` are excluded. With
    ``fit_shift`` the origin is also moved, ``C (x + s)^e``, by an outer
    bounded search over ``s``; it is off by default.
    """
    x, d = _select(deficit, fit_range, drop_nonpositive)
    ld = np.log(d)
    shift = 0.0
    if fit_shift:
        def err_at(s):
            lx_s = np.log(x + s)
            return _best_prefactor(lx_s, ld, _minimax_exponent(lx_s, ld))[1]
        res = minimize_scalar(err_at, bounds=(-0.5 * float(x.min()), 0.5 * float(x.min())), method="bounded",
                              options={"xatol": 1e-10})
        shift = float(res.x) if err_at(float(res.x)) < err_at(0.0) else 0.0
    lx = np.log(x + shift)
    e = _minimax_exponent(lx, ld)
    c, _ = _best_prefactor(lx, ld, e)
    if not (math.isfinite(e) and math.isfinite(c) and c > 0):
        raise NumericalError(f"fit {deficit.order}: solver produced exponent={e!r}, prefactor={c!r}")
    err = rel_error(d, c * (x + shift) ** e)
    return PowerLawFit(deficit.order, e, c, tuple(float(v) for v in fit_range), err, int(x.size),
                       shift=shift)


def fit_constrained(deficit: MomentProfile, sig: ScalingExponents, fit_range=DEFAULT_RANGE, *,
                    drop_nonpositive=False) -> PowerLawFit:
    """Prefactor-only minimax fit with the exponent fixed by ``sig``."""
    x, d = _select(deficit, fit_range, drop_nonpositive)
    e = exponent(deficit.order, sig)
    c, _ = _best_prefactor(np.log(x), np.log(d), e)
    if not (math.isfinite(c) and c > 0):
        raise NumericalError(f"constrained fit {deficit.order}: prefactor {c!r}")
    err = rel_error(d, c * x**e)
    return PowerLawFit(deficit.order, e, c, tuple(float(v) for v in fit_range), err, int(x.size),
                       constrained=True)


def extract_sigmas(fit10: PowerLawFit, fit20: PowerLawFit, fit01: PowerLawFit) -> ScalingExponents:
    """sigma1, sigma2 from the first two velocity moments; sigma_theta from the first temperature moment.

    At ``(0, 1)`` the exponent is ``sigma_theta + 2 sigma1 - sigma2``, so the
    intermittency constant is removed from the fitted value.
    """
    got = (fit10.order, fit20.order, fit01.order)
    want = (MomentOrder(1, 0), MomentOrder(2, 0), MomentOrder(0, 1))
    if got != want:
        raise ValidationError(f"extract_sigmas expects fits of orders {[str(o) for o in want]}, got "
                              f"{[str(o) for o in got]}")
    s1, s2 = fit10.exponent, fit20.exponent
    return ScalingExponents(s1, s2, fit01.exponent - (2 * s1 - s2))


def _chebyshev_linear(a: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, float]:
    """Minimise ``max |a @ p - y|`` exactly by enumerating reference sets.

    The optimum of this linear program sits on a vertex where ``k + 1`` of
    the residuals have equal magnitude (``k`` unknowns), so all such sets and
    sign patterns are tried and the feasible one with the least level wins.
    """
    rows, k = a.shape
    best_p, best_t = None, math.inf
    for subset in itertools.combinations(range(rows), k + 1):
        sub = a[list(subset)]
        for tail in itertools.product((1.0, -1.0), repeat=k):
            signs = np.array((1.0,) + tail)
            mat = np.hstack((sub, -signs[:, None]))
            if abs(np.linalg.det(mat)) < 1e-12:
                continue
            sol = np.linalg.solve(mat, y[list(subset)])
            p, t = sol[:k], abs(sol[k])
            level = float(np.max(np.abs(a @ p - y)))
            if level <= t * (1 + 1e-9) + 1e-14 and level < best_t:
                best_p, best_t = p, level
    if best_p is None:
        raise NumericalError("prefactor model: no feasible reference set")
    return best_p, best_t


def fit_prefactor_model(fits: Mapping) -> PrefactorModel:
    """Fit ``alpha' exp(n beta' + m beta'_theta)`` to the five lowest-order prefactors.

    The slopes come from an exact Chebyshev fit in log space (the relative
    error is a monotone function of the log spread), then ``alpha'`` is the
    minimax scale for those slopes.
    """
    lookup = {MomentOrder.of(k): v for k, v in fits.items()}
    missing = [str(o) for o in PREFACTOR_ORDERS if o not in lookup]
    if missing:
        raise ValidationError(f"prefactor model needs fits for orders {missing}")
    c = np.array([_prefactor_of(lookup[o]) for o in PREFACTOR_ORDERS], dtype=float)
    bad = [str(o) for o, v in zip(PREFACTOR_ORDERS, c) if not (v > 0 and math.isfinite(v))]
    if bad:
        raise ValidationError(f"prefactor model: non-positive prefactor for orders {bad}")
    nm = np.array([[o.n, o.m] for o in PREFACTOR_ORDERS], dtype=float)
    y = np.log(c)
    # closed-form seed from (1,0), (2,0), (0,1)
    seed_b = y[1] - y[0]
    seed_a = y[0] - seed_b
    seed_c = y[2] - seed_a
    a = np.hstack((np.ones((len(c), 1)), nm))
    p, level = _chebyshev_linear(a, y)
    seed_level = float(np.max(np.abs(a @ np.array([seed_a, seed_b, seed_c]) - y)))
    b, bt = (seed_b, seed_c) if seed_level <= level else (float(p[1]), float(p[2]))
    lq = y - nm @ np.array([b, bt])
    hi, lo = lq.max(), lq.min()
    alpha = math.exp(0.5 * (hi + lo)) / math.cosh(0.5 * (hi - lo))
    model = PrefactorModel(alpha, float(b), float(bt))
    pred = np.array([model.prefactor(o) for o in PREFACTOR_ORDERS])
    return PrefactorModel(alpha, float(b), float(bt), max_rel_error=rel_error(c, pred))


def _prefactor_of(v) -> float:
    return float(v.prefactor if isinstance(v, PowerLawFit) else v)


def predict_moment(order, sig: ScalingExponents, model: PrefactorModel, grid: WallNormalGrid,
                   case=None) -> MomentProfile:
    """Deficit-basis profile predicted by the scaling law; zero at the centre line."""
    from .types import FlowCase

    order = MomentOrder.of(order)
    e = exponent(order, sig)
    x = grid.points
    values = np.zeros_like(x)
    pos = x > 0
    values[pos] = model.prefactor(order) * x[pos] ** e
    case = case if case is not None else FlowCase(1.0, 1.0)
    return MomentProfile(order, grid, values, Basis.DEFICIT, case,
                         meta={"predicted": True, "exponent": e, "prefactor": model.prefactor(order)})


@dataclass(frozen=True)
class AnomalousScaling:
    space_time: float
    temperature: float
    intermittency: float
    flag: str
    space_time_ratio: float | None
    temperature_ratio: float | None

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def anomalous_scaling_report(sig: ScalingExponents, threshold=0.1) -> AnomalousScaling:
    """Split the exponent into its space-time, temperature and intermittency parts.

    Flags ``anomalous-dominated`` when both the space-time part
    ``sigma2 - sigma1`` and ``sigma_theta`` are below ``threshold`` times
    the order-independent part ``2 sigma1 - sigma2``.
    """
    st = sig.sigma2 - sig.sigma1
    th = sig.sigma_theta
    inter = 2 * sig.sigma1 - sig.sigma2
    scale = max(abs(sig.sigma1), abs(sig.sigma2), 1.0)
    if abs(inter) <= 1e-12 * scale:
        return AnomalousScaling(st, th, inter, "degenerate", None, None)
    r_st, r_th = abs(st) / abs(inter), abs(th) / abs(inter)
    flag = "anomalous-dominated" if (r_st < threshold and r_th < threshold) else "mixed"
    return AnomalousScaling(st, th, inter, flag, r_st, r_th)


def fit_low_orders(deficits: Mapping, fit_range=DEFAULT_RANGE, **kw) -> dict[MomentOrder, PowerLawFit]:
    out = {}
    for o in (MomentOrder(1, 0), MomentOrder(2, 0), MomentOrder(0, 1)):
        if o not in deficits:
            raise ValidationError(f"order {o} is required to determine the scaling exponents")
        out[o] = fit_power_law(deficits[o], fit_range, **kw)
    return out


def range_sweep(deficits: Mapping, upper_bounds: Sequence[float], x_lo=0.0, **kw) -> list[dict]:
    """Refit the scaling exponents for a series of shrinking fit ranges."""
    rows = []
    for x_hi in upper_bounds:
        low = fit_low_orders(deficits, (x_lo, x_hi), **kw)
        sig = extract_sigmas(*low.values())
        rows.append({"x_hi": float(x_hi), "sigma1": sig.sigma1, "sigma2": sig.sigma2,
                     "sigma_theta": sig.sigma_theta})
    return rows
