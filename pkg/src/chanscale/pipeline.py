"""
End-to-end processing: profiles (or snapshots) to a fit report.

Stages per flow case: moments -> deficit -> low-order fits -> sigmas ->
constrained fits -> prefactor model -> diagnostics.
"""
from __future__ import annotations

import datetime as _dt
import hashlib
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .errors import ChanscaleError, StageError, ValidationError
from .fitting import (
    DEFAULT_RANGE,
    PREFACTOR_ORDERS,
    AnomalousScaling,
    PowerLawFit,
    PrefactorModel,
    ScalingExponents,
    anomalous_scaling_report,
    extract_sigmas,
    fit_constrained,
    fit_low_orders,
    fit_prefactor_model,
    range_sweep,
)
from .io import atomic_write, read_profile_file, read_snapshot_file
from .moments import CenterlinePolicy, compute_moment, h_from_r, to_deficit
from .registry import CaseRegistry
from .synth import default_orders
from .types import Basis, FlowCase, MomentOrder, MomentProfile

SCHEMA = "chanscale-report/1"
DEFAULT_UPPER = 0.75
MAX_PURE = 7
MAX_MIXED = 6


@dataclass
class PipelineConfig:
    profiles: Sequence = ()
    snapshot: str | Path | None = None
    orders: Sequence | None = None
    fit_range: tuple[float, float] = DEFAULT_RANGE
    max_order: int | None = None
    drop_nonpositive: bool = False
    fit_shift: bool = False
    centerline_policy: str = CenterlinePolicy.CENTER_POINT.value
    sweep: Sequence[float] | None = None
    workers: int = 4


@dataclass
class CaseReport:
    case: FlowCase
    fits: dict[MomentOrder, PowerLawFit]
    sigmas: ScalingExponents
    model: PrefactorModel
    anomalous: AnomalousScaling
    registry: dict
    deficits: dict[MomentOrder, MomentProfile]
    fit_range: tuple[float, float]
    notes: list[str] = field(default_factory=list)
    sweep: list[dict] | None = None

    @property
    def tag(self) -> str:
        return f"re{self.case.re_tau:g}_pr{self.case.pr:g}"

    def to_dict(self) -> dict:
        orders = []
        for o in sorted(self.fits):
            row = self.fits[o].to_dict()
            row["model_prefactor"] = self.model.prefactor(o)
            orders.append(row)
        out = {
            "case": self.case.to_dict(),
            "registry": self.registry,
            "fit_range": list(self.fit_range),
            "notes": list(self.notes),
            "sigma1": self.sigmas.sigma1,
            "sigma2": self.sigmas.sigma2,
            "sigma_theta": self.sigmas.sigma_theta,
            "alpha_prime": self.model.alpha_prime,
            "beta_prime": self.model.beta_prime,
            "beta_prime_theta": self.model.beta_prime_theta,
            "prefactor_model_max_rel_error": self.model.max_rel_error,
            "anomalous": self.anomalous.to_dict(),
            "orders": orders,
        }
        if self.sweep is not None:
            out["range_sweep"] = self.sweep
        return out

    def plot_tables(self) -> dict[str, list[tuple]]:
        """Rows ``(n, m, x2_over_h, deficit, fit)`` inside the fit range, one table per panel."""
        panels = {"velocity": [], "temperature": [], "mixed": []}
        lo, hi = self.fit_range
        for o in sorted(self.fits):
            d = self.deficits[o]
            fit = self.fits[o]
            mask = (d.x > lo) & (d.x <= hi) & (d.x > 0)
            key = "velocity" if o.is_velocity else "temperature" if o.is_temperature else "mixed"
            for xi, di, fi in zip(d.x[mask], d.values[mask], fit.evaluate(d.x[mask])):
                panels[key].append((o.n, o.m, float(xi), float(di), float(fi)))
        return panels


@dataclass
class ReportBundle:
    cases: list[CaseReport]
    provenance: dict

    def to_dict(self) -> dict:
        return {"schema": SCHEMA, "provenance": self.provenance, "cases": [c.to_dict() for c in self.cases]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def write(self, out_dir) -> list[Path]:
        out_dir = Path(out_dir)
        written = [out_dir / "report.json"]
        atomic_write(written[0], self.to_json())
        for case in self.cases:
            for panel, rows in case.plot_tables().items():
                if not rows:
                    continue
                lines = ["n,m,x2_over_h,deficit,fit"] + [f"{n},{m},{x!r},{d!r},{f!r}" for n, m, x, d, f in rows]
                path = out_dir / f"{case.tag}_{panel}.csv"
                atomic_write(path, "\n".join(lines) + "\n")
                written.append(path)
            lines = ["n,m,fitted_prefactor,model_prefactor,exponent,max_rel_error"]
            for o in sorted(case.fits):
                f = case.fits[o]
                lines.append(f"{o.n},{o.m},{f.prefactor!r},{case.model.prefactor(o)!r},{f.exponent!r},"
                             f"{f.max_rel_error!r}")
            path = out_dir / f"{case.tag}_prefactors.csv"
            atomic_write(path, "\n".join(lines) + "\n")
            written.append(path)
        return written


def check_order_limits(order: MomentOrder, max_order: int | None = None):
    pure = MAX_PURE if max_order is None else max_order
    mixed = MAX_MIXED if max_order is None else max_order
    if order.is_mixed and order.total > mixed:
        raise ValidationError(f"mixed order {order} exceeds n+m <= {mixed}; raise it with --max-order")
    if not order.is_mixed and order.total > pure:
        raise ValidationError(f"pure order {order} exceeds {pure}; raise it with --max-order")


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _source(p: MomentProfile) -> str:
    return str(p.meta.get("source", f"profile{p.order}"))


def _load_inputs(config: PipelineConfig):
    profiles, inputs = [], []
    for item in config.profiles:
        if isinstance(item, MomentProfile):
            profiles.append(item)
            continue
        path = Path(item)
        try:
            profiles.append(read_profile_file(path))
        except ChanscaleError as exc:
            raise StageError("read", path, exc) from exc
        inputs.append({"path": str(path), "sha256": _sha256(path)})
    if config.snapshot is not None:
        path = Path(config.snapshot)
        try:
            ens = read_snapshot_file(path)
        except ChanscaleError as exc:
            raise StageError("read", path, exc) from exc
        inputs.append({"path": str(path), "sha256": _sha256(path)})
        orders = [MomentOrder.of(o) for o in (config.orders or default_orders())]
        for o in orders:
            try:
                check_order_limits(o, config.max_order)
                prof = compute_moment(ens, o)
            except ChanscaleError as exc:
                raise StageError("moments", f"{path} order {o}", exc) from exc
            profiles.append(prof.replace(meta={"source": f"{path}#{o}"}))
    if not profiles:
        raise ValidationError("no input profiles given")
    return profiles, inputs


def _case_key(c: FlowCase):
    return (c.re_tau, c.pr, c.u_tau, c.theta_tau, c.h)


def _instantaneous(by_order: dict[MomentOrder, MomentProfile], label: str) -> dict[MomentOrder, MomentProfile]:
    """Convert any fluctuation-basis inputs to instantaneous moments."""
    raw = {o: p for o, p in by_order.items() if p.basis is not Basis.FLUCTUATION}
    central = {o: p for o, p in by_order.items() if p.basis is Basis.FLUCTUATION}
    for o, p in central.items():
        means = (raw.get(MomentOrder(1, 0)), raw.get(MomentOrder(0, 1)))
        try:
            raw[o] = h_from_r(means, central, o).replace(meta=dict(p.meta))
        except ChanscaleError as exc:
            raise StageError("moments", f"{label}: {_source(p)}", exc) from exc
    return raw


def _process_case(profiles: list[MomentProfile], config: PipelineConfig) -> CaseReport:
    case = profiles[0].case
    label = f"case Re_tau={case.re_tau:g} Pr={case.pr:g}"
    by_order: dict[MomentOrder, MomentProfile] = {}
    for p in profiles:
        try:
            check_order_limits(p.order, config.max_order)
        except ChanscaleError as exc:
            raise StageError("validate", _source(p), exc) from exc
        if p.order in by_order:
            raise StageError("validate", _source(p),
                             ValidationError(f"order {p.order} supplied twice for {label}"))
        by_order[p.order] = p

    deficits = {}
    for o, p in _instantaneous(by_order, label).items():
        try:
            deficits[o] = p if p.basis is Basis.DEFICIT else to_deficit(p, config.centerline_policy)
        except ChanscaleError as exc:
            raise StageError("deficit", _source(p), exc) from exc

    kw = dict(drop_nonpositive=config.drop_nonpositive)
    try:
        low = fit_low_orders(deficits, config.fit_range, fit_shift=config.fit_shift, **kw)
        sig = extract_sigmas(*low.values())
    except ChanscaleError as exc:
        raise StageError("fit-low", label, exc) from exc

    fits = dict(low)
    for o in sorted(deficits):
        if o in fits:
            continue
        try:
            fits[o] = fit_constrained(deficits[o], sig, config.fit_range, **kw)
        except ChanscaleError as exc:
            raise StageError("fit-constrained", _source(deficits[o]), exc) from exc

    try:
        model = fit_prefactor_model({o: fits[o] for o in PREFACTOR_ORDERS if o in fits})
    except ChanscaleError as exc:
        raise StageError("prefactor-model", label, exc) from exc

    notes = []
    lo, hi = config.fit_range
    if hi < DEFAULT_UPPER:
        notes.append(f"reduced fit range ({lo:g}, {hi:g}] (default upper bound {DEFAULT_UPPER:g})")
    if config.drop_nonpositive:
        notes.append("non-positive deficit values dropped from fits")
    if config.fit_shift:
        notes.append("origin shift fitted for low-order moments")
    sweep = None
    if config.sweep:
        try:
            sweep = range_sweep(deficits, config.sweep, x_lo=lo, **kw)
        except ChanscaleError as exc:
            raise StageError("range-sweep", label, exc) from exc
    return CaseReport(case, fits, sig, model, anomalous_scaling_report(sig), CaseRegistry.default().match(case),
                      deficits, (float(lo), float(hi)), notes, sweep)


def run_pipeline(config: PipelineConfig) -> ReportBundle:
    profiles, inputs = _load_inputs(config)
    groups: dict[tuple, list[MomentProfile]] = {}
    for p in profiles:
        groups.setdefault(_case_key(p.case), []).append(p)
    keys = sorted(groups)
    workers = max(1, min(config.workers, len(keys)))
    if workers == 1:
        cases = [_process_case(groups[k], config) for k in keys]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            cases = list(pool.map(lambda k: _process_case(groups[k], config), keys))
    provenance = {
        "inputs": inputs,
        "fit_range": [float(v) for v in config.fit_range],
        "flags": {
            "max_order": config.max_order,
            "drop_nonpositive": config.drop_nonpositive,
            "fit_shift": config.fit_shift,
            "centerline_policy": CenterlinePolicy(config.centerline_policy).value,
            "sweep": None if config.sweep is None else [float(v) for v in config.sweep],
        },
        "created": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
    }
    return ReportBundle(cases, provenance)


def strip_timestamps(report: dict) -> dict:
    """Copy of a report dict without the run timestamp, for comparing runs."""
    out = json.loads(json.dumps(report))
    out.get("provenance", {}).pop("created", None)
    return out
