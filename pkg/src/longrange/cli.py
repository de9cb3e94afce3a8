"""Command line entry point: ``longrange <command> ...``."""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import harness


def _dump(payload: dict) -> None:
    print(json.dumps(harness._jsonable(payload), indent=2, sort_keys=True))


def cmd_zeta(args) -> int:
    from .potential import PotentialSpec, fit_asymptotics, integrate_fundamental, validate_A1, write_zeta_csv

    if args.kind == "zero":
        spec = PotentialSpec.zero()
    else:
        spec = PotentialSpec.inverse_square(args.sigma1, args.r0, args.extension)
    start = time.perf_counter()
    pair = integrate_fundamental(spec, args.tmax, args.dt)
    elapsed = time.perf_counter() - start
    if args.out:
        write_zeta_csv(pair, args.out)
    summary = {"kind": spec.kind, "t_max": pair.t_max, "nodes": int(pair.times.size),
               "max_wronskian_defect": float(np.max(pair.wronskian_defect())), "runtime_s": elapsed}
    if spec.kind != "zero":
        consts = fit_asymptotics(pair)
        summary.update(lambda_hat=consts.lambda_hat, lambda_closed_form=spec.lam, c1=consts.c1, c2=consts.c2,
                       c_plus=consts.c_plus)
        summary["assumption_A1"] = validate_A1(pair, consts).to_dict()
    _dump(summary)
    return 0


def cmd_coeffs(args) -> int:
    from .nonlinearity import (
        DegenerateFitError, NonlinearityParams, check_A2, decay_exponent_fit, fourier_coefficients, make_symbol,
    )

    params = NonlinearityParams(args.d, args.lam, args.eta)
    table = fourier_coefficients(make_symbol(args.symbol, params, args.mu), args.N)
    if args.out:
        with open(args.out, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["n", "re_gn", "im_gn", "abs_gn"])
            for n, re, im, ab in table.rows():
                w.writerow([n, f"{re:.17g}", f"{im:.17g}", f"{ab:.17g}"])
    try:
        decay = decay_exponent_fit(table)
    except DegenerateFitError:
        decay = None
    _dump({"symbol": table.label, "p_c": params.p_c, "quadrature_points": table.quadrature_points,
           "g0": table[0], "g1": table[1], "decay_exponent": decay, "A2": check_A2(table, params).to_dict()})
    return 0


def cmd_check_params(args) -> int:
    from .params import AdmissibilityError, parameter_windows

    try:
        w = parameter_windows(args.d, args.lam, args.eta, args.delta)
        if args.b is not None:
            w.check_b(args.b)
    except AdmissibilityError as exc:
        _dump({"pass": False, "error": str(exc)})
        return 2
    out = w.to_dict()
    out["pass"] = True
    if args.b is not None:
        out["b"] = args.b
    _dump(out)
    return 0


def cmd_verify_identities(args) -> int:
    result = harness.identity_suite(args.suite)
    if args.out:
        harness.write_report(result, args.out)
    brief = {k: {"residuals": v.get("residuals"), "passed": v["passed"]} for k, v in result["cases"].items()}
    _dump({"suite": args.suite, "passed": result["passed"], "cases": brief})
    return 0 if result["passed"] else 1


def cmd_simulate(args) -> int:
    from .dynamics import paired_experiment
    from .profile import write_profile_csv

    exp = harness.load_config(args.config)
    cfg = exp.resolve()
    main, ablation, traj = paired_experiment(cfg)
    out = Path(args.out)
    (out / "snapshots").mkdir(parents=True, exist_ok=True)
    harness.write_trajectory_csv(traj, out / "trajectory.csv", "profile")
    for t, field in sorted(traj.snapshots.items()):
        write_profile_csv(field, out / "snapshots" / f"u_t{t:09.3f}.csv")
    meta = {
        "config": exp.to_dict(),
        "resolved": main.config,
        "admissibility": cfg.windows.to_dict(),
        "final_data_membership": cfg.data.sobolev_status(),
        "main": main.to_dict(),
        "ablation_no_log": ablation.to_dict(),
        "residual_linf": traj.residual_linf["profile"].tolist(),
    }
    harness.write_report(meta, out / "meta.json")
    _dump({"run": str(out), "slope": main.slope, "threshold": main.threshold, "pass": main.passed,
           "ablation_slope": ablation.slope, "runtime_s": main.runtime_s})
    return 0


def cmd_report(args) -> int:
    run = Path(args.run)
    meta = harness.read_report(run / "meta.json")
    series = harness.read_trajectory_csv(run / "trajectory.csv")
    main = meta["main"]
    ablation = meta["ablation_no_log"]
    pos = series["residual_l2"] > 0
    slope, intercept, r2 = harness.fit_power_law(series["t"][pos], series["residual_l2"][pos])
    threshold = main["threshold"]
    margin = main["margin"]
    norms = main.get("norms", {})
    scaled = [v["scaled"] for v in norms.values()]
    variation = (max(scaled) - min(scaled)) / max(scaled) if scaled else None
    report = {
        "run": str(run),
        "slope": slope, "intercept": intercept, "r2": r2,
        "threshold": threshold, "margin": margin,
        "pass": threshold is not None and slope <= threshold + margin,
        "ablation_slope": ablation["slope"],
        "ablation_gap": None if ablation["slope"] is None else ablation["slope"] - slope,
        "norms": norms, "scaled_norm_variation": variation,
        "admissibility": meta["admissibility"],
    }
    if not args.skip_identities:
        ids = harness.identity_suite("all")
        report["identity_residuals"] = {k: v.get("residuals") for k, v in ids["cases"].items()}
        report["identities_pass"] = ids["passed"]
    harness.write_report(report, args.out)
    _dump({k: report[k] for k in ("slope", "threshold", "pass", "ablation_slope", "scaled_norm_variation")})
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="longrange", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    z = sub.add_parser("zeta", help="integrate the fundamental solutions")
    z.add_argument("--kind", choices=["zero", "inverse-square"], default="inverse-square")
    z.add_argument("--sigma1", type=float, default=0.09)
    z.add_argument("--r0", type=float, default=1.0)
    z.add_argument("--extension", choices=["matched", "cap"], default="matched")
    z.add_argument("--tmax", type=float, default=1e5)
    z.add_argument("--dt", type=float, default=0.01)
    z.add_argument("--out")
    z.set_defaults(func=cmd_zeta)

    c = sub.add_parser("coeffs", help="Fourier coefficients of a symbol")
    c.add_argument("--symbol", choices=["gauge", "re-power", "two-term"], required=True)
    c.add_argument("--d", type=int, default=1)
    c.add_argument("--lambda", dest="lam", type=float, default=0.1)
    c.add_argument("--eta", type=float, default=0.1)
    c.add_argument("--mu", type=float, default=1.0)
    c.add_argument("--N", type=int, default=2048)
    c.add_argument("--out")
    c.set_defaults(func=cmd_coeffs)

    k = sub.add_parser("check-params", help="admissibility windows")
    k.add_argument("--d", type=int, required=True)
    k.add_argument("--lambda", dest="lam", type=float, required=True)
    k.add_argument("--eta", type=float, default=0.1)
    k.add_argument("--delta", type=float)
    k.add_argument("--b", type=float)
    k.set_defaults(func=cmd_check_params)

    v = sub.add_parser("verify-identities", help="propagator identity residuals")
    v.add_argument("--suite", choices=["mdfm", "lens", "factorization", "all"], default="all")
    v.add_argument("--out")
    v.set_defaults(func=cmd_verify_identities)

    s = sub.add_parser("simulate", help="run a final-state experiment")
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_simulate)

    r = sub.add_parser("report", help="summarize a run directory")
    r.add_argument("--run", required=True)
    r.add_argument("--out", required=True)
    r.add_argument("--skip-identities", action="store_true")
    r.set_defaults(func=cmd_report)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
