"""
Command line interface.

    chanscale moments SNAPSHOT.bin --out DIR [--orders 1,0 2,0 ...]
    chanscale fit PROFILE... [--snapshot F] --out DIR [--x-lo 0 --x-hi 0.75]
    chanscale predict --n 3 --m 1 --sigmas S1 S2 ST --model A B BT --out FILE
    chanscale synth --out DIR [--noise AMP --seed S] [--ensemble N1 N3 NSNAP]
    chanscale transform PROFILE --out FILE [--a-sx ...]
    chanscale report mpc --n N --m M
    chanscale registry [--json]

Exit codes: 0 success, 2 validation error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .errors import ChanscaleError
from .fitting import DEFAULT_RANGE, PrefactorModel, ScalingExponents, predict_moment
from .io import read_profile_file, read_snapshot_file, write_profile, write_snapshot_file
from .moments import CenterlinePolicy, compute_moment
from .mpc import SymmetryParams, apply_symmetry, term_summary
from .pipeline import PipelineConfig, check_order_limits, run_pipeline
from .registry import CaseRegistry
from .synth import (
    REFERENCE_MODEL,
    REFERENCE_SIGMAS,
    Noise,
    default_orders,
    generate_ensemble,
    generate_profiles,
    reference_spec,
)
from .types import FlowCase, MomentOrder, WallNormalGrid


def _order(text: str) -> MomentOrder:
    try:
        n, m = (int(v) for v in text.split(","))
        return MomentOrder(n, m)
    except (ValueError, ChanscaleError):
        raise argparse.ArgumentTypeError(f"order must look like N,M with N+M >= 1, got {text!r}") from None


def profile_name(order: MomentOrder) -> str:
    return f"moment_n{order.n}_m{order.m}.txt"


def cmd_moments(args):
    ens = read_snapshot_file(args.snapshot)
    orders = args.orders or default_orders()
    out = Path(args.out)
    for o in orders:
        check_order_limits(o, args.max_order)
        path = out / profile_name(o)
        write_profile(path, compute_moment(ens, o), extra_meta={"snapshot": str(args.snapshot)})
        print(path)
    return 0


def cmd_fit(args):
    config = PipelineConfig(
        profiles=args.profiles,
        snapshot=args.snapshot,
        orders=args.orders,
        fit_range=(args.x_lo, args.x_hi),
        max_order=args.max_order,
        drop_nonpositive=args.drop_nonpositive,
        fit_shift=args.fit_shift,
        centerline_policy=args.centerline,
        sweep=args.sweep,
    )
    bundle = run_pipeline(config)
    for path in bundle.write(args.out):
        print(path)
    for case in bundle.cases:
        s = case.sigmas
        worst = max(f.max_rel_error for f in case.fits.values())
        print(f"{case.tag}: sigma1={s.sigma1:.6g} sigma2={s.sigma2:.6g} sigma_theta={s.sigma_theta:.6g} "
              f"alpha'={case.model.alpha_prime:.6g} beta'={case.model.beta_prime:.6g} "
              f"beta'_theta={case.model.beta_prime_theta:.6g} worst_rel_error={worst:.3e} "
              f"[{case.anomalous.flag}]", file=sys.stderr)
    return 0


def cmd_predict(args):
    sig = ScalingExponents(*args.sigmas)
    model = PrefactorModel(*args.model)
    grid = read_profile_file(args.grid).grid if args.grid else WallNormalGrid.default_synthetic()
    case = FlowCase(args.re_tau, args.pr, args.u_tau, args.theta_tau)
    prof = predict_moment(MomentOrder(args.n, args.m), sig, model, grid, case)
    write_profile(args.out, prof, extra_meta={"sigmas": list(sig.as_tuple()),
                                              "model": [model.alpha_prime, model.beta_prime, model.beta_prime_theta]})
    print(args.out)
    return 0


def cmd_synth(args):
    case = FlowCase(args.re_tau, args.pr, args.u_tau, args.theta_tau)
    noise = Noise(args.noise, args.seed) if args.noise > 0 else None
    orders = args.orders or default_orders()
    sig = ScalingExponents(*args.sigmas) if args.sigmas else REFERENCE_SIGMAS
    model = PrefactorModel(*args.model) if args.model else REFERENCE_MODEL
    spec = reference_spec(noise=noise, case=case, orders=orders, sig=sig, model=model)
    out = Path(args.out)
    for o, prof in generate_profiles(spec, orders).items():
        path = out / profile_name(o)
        write_profile(path, prof)
        print(path)
    if args.ensemble:
        n1, n3, ns = args.ensemble
        ens = generate_ensemble(spec, (n1, len(spec.grid), n3), ns, seed=args.seed)
        path = out / "snapshots.bin"
        write_snapshot_file(path, ens)
        print(path)
    return 0


def cmd_transform(args):
    prof = read_profile_file(args.profile)
    a_h = {prof.order: args.a_h} if args.a_h else {}
    params = SymmetryParams(args.a_sx, args.a_st, args.a_theta, args.a_ss, (0.0, args.a_x2, 0.0), a_h)
    out = apply_symmetry(prof, params)
    write_profile(args.out, out, extra_meta={"symmetry": {
        "a_sx": args.a_sx, "a_st": args.a_st, "a_theta": args.a_theta, "a_ss": args.a_ss,
        "a_x2": args.a_x2, "a_h": args.a_h}})
    print(args.out)
    return 0


def cmd_report_mpc(args):
    summary = term_summary(MomentOrder(args.n, args.m))
    print(json.dumps(summary, indent=2, ensure_ascii=False))
    return 0


def cmd_registry(args):
    reg = CaseRegistry.default()
    if args.json:
        print(json.dumps(reg.to_rows(), indent=2))
    else:
        print(reg.format_table())
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="chanscale", description=__doc__.splitlines()[1])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("moments", help="compute one-point moments from a snapshot file")
    p.add_argument("snapshot")
    p.add_argument("--orders", nargs="+", type=_order)
    p.add_argument("--max-order", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_moments)

    p = sub.add_parser("fit", help="fit scaling laws and write a report")
    p.add_argument("profiles", nargs="*")
    p.add_argument("--snapshot")
    p.add_argument("--orders", nargs="+", type=_order, help="orders to compute from --snapshot")
    p.add_argument("--x-lo", type=float, default=DEFAULT_RANGE[0])
    p.add_argument("--x-hi", type=float, default=DEFAULT_RANGE[1])
    p.add_argument("--max-order", type=int)
    p.add_argument("--drop-nonpositive", action="store_true")
    p.add_argument("--fit-shift", action="store_true", help="also fit an x2 origin shift (experimental)")
    p.add_argument("--centerline", choices=[c.value for c in CenterlinePolicy],
                   default=CenterlinePolicy.CENTER_POINT.value)
    p.add_argument("--sweep", nargs="+", type=float, help="upper fit bounds for a sigma range sweep")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("predict", help="predict a deficit profile from sigmas and a prefactor model")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--sigmas", nargs=3, type=float, required=True, metavar=("S1", "S2", "ST"))
    p.add_argument("--model", nargs=3, type=float, required=True, metavar=("ALPHA", "BETA", "BETA_T"))
    p.add_argument("--grid", help="profile file whose grid is reused")
    p.add_argument("--re-tau", type=float, default=1.0)
    p.add_argument("--pr", type=float, default=1.0)
    p.add_argument("--u-tau", type=float, default=1.0)
    p.add_argument("--theta-tau", type=float, default=1.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("synth", help="write synthetic profiles (and optionally snapshots)")
    p.add_argument("--out", required=True)
    p.add_argument("--orders", nargs="+", type=_order)
    p.add_argument("--sigmas", nargs=3, type=float, metavar=("S1", "S2", "ST"))
    p.add_argument("--model", nargs=3, type=float, metavar=("ALPHA", "BETA", "BETA_T"))
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--re-tau", type=float, default=2000.0)
    p.add_argument("--pr", type=float, default=7.0)
    p.add_argument("--u-tau", type=float, default=1.0)
    p.add_argument("--theta-tau", type=float, default=1.0)
    p.add_argument("--ensemble", nargs=3, type=int, metavar=("N1", "N3", "NSNAP"))
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("transform", help="apply the scaling/translation symmetry to a profile")
    p.add_argument("profile")
    p.add_argument("--a-sx", type=float, default=0.0)
    p.add_argument("--a-st", type=float, default=0.0)
    p.add_argument("--a-theta", type=float, default=0.0)
    p.add_argument("--a-ss", type=float, default=0.0)
    p.add_argument("--a-x2", type=float, default=0.0)
    p.add_argument("--a-h", type=float, default=0.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_transform)

    p = sub.add_parser("report", help="structural reports")
    rsub = p.add_subparsers(dest="report", required=True)
    r = rsub.add_parser("mpc", help="MPC equation terms and continuity counts as JSON")
    r.add_argument("--n", type=int, required=True)
    r.add_argument("--m", type=int, required=True)
    r.set_defaults(func=cmd_report_mpc)

    p = sub.add_parser("registry", help="list the bundled (Re_tau, Pr) case table")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_registry)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ChanscaleError as exc:
        print(f"chanscale {args.command}: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
