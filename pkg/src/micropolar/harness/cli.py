"""Command line entry point: ``micropolar <subcommand> ...``.

Exit codes: 0 success, 1 a check failed, 2 usage or I/O error.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from .. import linear_system as ls
from .. import solver as sv
from ..grid import VectorSpectralField, WaveGrid, leray_project, random_field
from ..initial_data import (
    IdentityViolation,
    ProfileParams,
    assemble_U0_W0,
    build_a0,
    condition_terms,
    largeness_metrics,
    profile_norms_grid,
    resolving_dims,
    support_report,
)
from ..snapshot import write_snapshot
from . import report as rpt
from . import scaling as sc
from . import verify as vf
from .config import ConfigError, ExperimentConfig, parse_amp, parse_box, parse_dims, parse_floats
from .csvio import CSVParseError, write_table

log = logging.getLogger("micropolar")

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _json(obj):
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _load_config(args):
    if getattr(args, "config", None):
        return ExperimentConfig.from_file(args.config)
    return ExperimentConfig.default()


def _out_dir(args, cfg, name):
    out = Path(args.out) if getattr(args, "out", None) else cfg.output_root() / name
    out.mkdir(parents=True, exist_ok=True)
    return out


def _params(args, cfg):
    eps = args.eps if args.eps is not None else cfg.eps
    p = args.p if args.p is not None else cfg.p
    amp = parse_amp(args.amp) if getattr(args, "amp", None) else cfg.amp
    const_C = args.const_C if getattr(args, "const_C", None) is not None else cfg.const_C
    try:
        return ProfileParams(eps, p=p, amp=amp, const_C=const_C)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _grid(args, eps, dealias):
    dims = parse_dims(args.grid) if args.grid else resolving_dims(eps, dealias=dealias)
    box = parse_box(args.box or "auto", eps)
    return WaveGrid(dims, box)


# ---------------------------------------------------------------- initdata


def cmd_initdata(args):
    cfg = _load_config(args)
    params = _params(args, cfg)
    grid = _grid(args, params.eps, dealias=False)
    try:
        a0 = build_a0(params, grid)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    out = _out_dir(args, cfg, "initdata")
    sup = support_report(a0, params.eps)
    norms = profile_norms_grid(a0, params.p)
    terms = condition_terms(None, None, a0, params)
    try:
        large = largeness_metrics(a0)
        identity_ok = True
    except IdentityViolation as exc:
        log.error("%s", exc)
        large, identity_ok = {}, False
    cols = [
        ("eps", params.eps),
        ("p", params.p),
        ("amplitude", params.amplitude),
        ("const_C", params.const_C),
        ("N1", grid.dims[0]),
        ("N2", grid.dims[1]),
        ("N3", grid.dims[2]),
        ("modes", sup["modes"]),
        ("inside_C", int(sup.get("inside_C", False))),
        ("a0_l1", norms.l1),
        ("a0_lp_dual", norms.lp_dual),
        ("a0_linf", norms.linf),
        ("omega_hat_l1", norms.omega_l1),
        ("pre_exponential", terms.pre_exponential),
        ("exp_argument", terms.exp_argument),
        ("log_lhs", terms.log_value),
    ]
    for key in ("u_Linf", "u_B-1_inf_inf", "w_Linf", "w_B-1_inf_inf", "omega_identity_defect"):
        cols.append((key, large.get(key, math.nan)))
    write_table(out / "initdata.csv", "micropolar-initdata", [c for c, _ in cols], [[v for _, v in cols]])
    if args.snapshot:
        write_snapshot(out / "a0.mpsf", a0, params.eps)
        U0, W0 = assemble_U0_W0(a0)
        write_snapshot(out / "U0.mpsf", U0, params.eps)
        write_snapshot(out / "W0.mpsf", W0, params.eps)
    print(f"initdata: {sup['modes']} modes, inside C: {sup.get('inside_C')}, log lhs {terms.log_value:.6g} -> {out}")
    return EXIT_OK if sup.get("inside_C") and identity_ok else EXIT_FAIL


# ---------------------------------------------------------------- linear


def cmd_linear(args):
    cfg = _load_config(args)
    params = _params(args, cfg)
    grid = _grid(args, params.eps, dealias=False)
    try:
        a0 = build_a0(params, grid)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if args.t_samples < 1 or not (args.t_max > 0):
        raise UsageError("need --t-max > 0 and --t-samples >= 1")
    out = _out_dir(args, cfg, "linear")
    t_cert = (0.1, 0.5, 1.0, 2.0, 5.0)
    cert = ls.decay_certificate(grid, t_cert)
    cert_doc = {
        "decay_rate": cert.decay_rate,
        "K_bound": cert.K_bound,
        "K_measured": vf._round(cert.K_measured),
        "t_samples": list(cert.t_samples),
        "modes_checked": cert.modes_checked,
        "lam_samples": cert.lam_samples,
        "lam_min_margin": vf._round(cert.lam_min_margin),
        "lam_exact_ok": cert.lam_exact_ok,
        "passed": cert.passed,
    }
    (out / "decay_certificate.json").write_text(_json(cert_doc))
    t_grid = np.linspace(0.0, args.t_max, args.t_samples)
    series = ls.smallness_series(a0, t_grid, params.p, eps=params.eps)
    header, body = series.rows()
    write_table(out / "smallness.csv", "micropolar-smallness", header, body)
    print(f"linear: K = {cert.K_measured:.4f} (bound {cert.K_bound}), smallness rate {series.rate:.4f} -> {out}")
    return EXIT_OK if cert.passed else EXIT_FAIL


# ---------------------------------------------------------------- simulate


def _perturbation(grid, seed, amp):
    if amp == 0:
        return None, None
    band = tuple(n // 6 for n in grid.dims)
    v = leray_project(random_field(grid, seed, "sim_v", band=band, vector=True))
    c = random_field(grid, seed, "sim_c", band=band, vector=True)
    v = v * (amp / float(np.max(np.abs(v.to_physical()))))
    c = c * (amp / float(np.max(np.abs(c.to_physical()))))
    return v, c


def cmd_simulate(args):
    cfg = _load_config(args)
    params = _params(args, cfg)
    grid = _grid(args, params.eps, dealias=True)
    try:
        a0 = build_a0(params, grid)
        scfg = sv.SolverConfig(
            dt=args.dt if args.dt is not None else cfg.dt,
            t_end=args.t_end if args.t_end is not None else cfg.t_end,
            scheme=args.scheme or cfg.scheme,
            substep=args.substep or cfg.substep,
            dealias=not args.no_dealias,
            stride=args.stride if args.stride is not None else cfg.stride,
            p=params.p,
            eta_mult=args.eta_mult if args.eta_mult is not None else cfg.eta_mult,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    seed = args.seed if args.seed is not None else cfg.seed
    v0, c0 = _perturbation(grid, seed, args.pert_amp)
    out = _out_dir(args, cfg, f"simulate-{args.mode}")
    meta = {
        "mode": args.mode,
        "eps": params.eps,
        "p": params.p,
        "amplitude": params.amplitude,
        "dims": list(grid.dims),
        "box": list(grid.lengths),
        "dt": scfg.dt,
        "t_end": scfg.t_end,
        "scheme": scfg.scheme,
        "substep": scfg.substep,
        "dealias": scfg.dealias,
        "stride": scfg.stride,
        "eta_mult": scfg.eta_mult,
        "pert_amp": args.pert_amp,
        "seed": seed,
    }
    status = EXIT_OK
    if args.mode == "oracle":
        rep = sv.full_vs_perturbation_oracle(scfg, a0, v0, c0)
        records = rep.records
        write_table(
            out / "oracle.csv", "micropolar-oracle", ("t", "difference", "envelope"),
            [(t, d, rep.envelope) for t, d in zip(rep.times, rep.diffs)],
        )
        meta.update(
            eta=rep.eta,
            max_difference=rep.max_diff,
            envelope=rep.envelope,
            c_conv=rep.c_conv,
            observed_order=rep.observed_order,
            ladder=rep.ladder,
            ladder_differences=rep.ladder_diffs,
            gamma_crossed=rep.crossed,
            passed=rep.passed,
        )
        final = None
        if not rep.passed:
            status = EXIT_FAIL
        print(f"oracle: max diff {rep.max_diff:.3e} vs envelope {rep.envelope:.3e} (order {rep.observed_order:.2f})")
    else:
        result = sv.run_experiment(scfg, a0=a0, v0=v0, c0=c0, mode=args.mode, grid=grid)
        records = result.records
        meta.update(eta=result.eta, blowup=result.blowup, gamma_crossed=result.crossing_time is not None)
        final = result
        if result.blowup:
            log.error("%s", result.message)
            status = EXIT_FAIL
    write_table(out / rpt.DIAGNOSTICS_FILE, rpt.DIAGNOSTICS_SCHEMA, sv.DiagnosticsRecord.COLUMNS, [r.row() for r in records])
    (out / rpt.META_FILE).write_text(_json(meta))
    if args.snapshots and final is not None:
        u, w = sv.state_at(final, a0, grid)
        write_snapshot(out / "u.mpsf", VectorSpectralField(grid, u), params.eps)
        write_snapshot(out / "w.mpsf", VectorSpectralField(grid, w), params.eps)
    text, _ = rpt.summarize(out)
    print(text, end="")
    return status


# ---------------------------------------------------------------- verify


def cmd_verify(args):
    cfg = _load_config(args)
    names = set(args.check) if args.check else None
    if names:
        unknown = names - set(vf.REGISTRY)
        if unknown:
            raise UsageError(f"unknown checks: {sorted(unknown)}")
    results = vf.run_checks(cfg, names)
    report = vf.build_report(cfg, results)
    text = vf.report_json(report)
    out = _out_dir(args, cfg, "verify")
    (out / "verify.json").write_text(text)
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.name}  value={r.value:.3e} tol={r.tolerance:.1e}  {r.detail}")
    if not report["passed"]:
        print("failed checks: " + ", ".join(report["failed"]), file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


# ---------------------------------------------------------------- scaling


def cmd_scaling(args):
    cfg = _load_config(args)
    eps_list = parse_floats(args.eps_list) if args.eps_list else cfg.eps_list
    p = args.p if args.p is not None else cfg.p
    const_C = args.const_C if args.const_C is not None else cfg.const_C
    for e in eps_list:
        if not (0 < e <= 0.25):
            raise UsageError(f"eps values must lie in (0, 1/4], got {e}")
    if not (4 < p < 6):
        raise UsageError(f"p must lie in (4, 6), got {p}")
    dims = {e: resolving_dims(e) for e in eps_list if e >= args.largeness_min_eps} if args.largeness else None
    rows = sc.sweep(eps_list, p, const_C, cfg.amp, workers=args.workers, largeness_dims=dims)
    fits = sc.fit_exponents(rows, p)
    out = _out_dir(args, cfg, "scaling")
    sc.write_outputs(out, rows, fits)
    print(f"{'eps':>10} {'|a0|_Lp*':>12} {'pre-exp':>12} {'omega/LL^.5':>12}")
    for r in rows:
        print(f"{r['eps']:10.6g} {r['a0_lp_dual']:12.6g} {r['pre_exponential']:12.6g} {r['omega_ratio']:12.6g}")
    if not fits:
        print("single eps: raw values only")
    for f in fits:
        print(f"fit {f.quantity}: slope {f.slope:.4f} (expected {f.expected:.4f} +- {100 * f.rel_tol:.0f}%) "
              f"{'ok' if f.passed else 'outside'}")
    if fits:
        print(f"omega ratio band: {sc.omega_band(rows):.4f} (<= 2)")
    return EXIT_OK


# ---------------------------------------------------------------- report


def cmd_report(args):
    text, _ = rpt.summarize(args.run_dir)
    print(text, end="")
    return EXIT_OK


# ---------------------------------------------------------------- parser


def build_parser():
    parser = argparse.ArgumentParser(prog="micropolar", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, datum=True, grid=True):
        p.add_argument("--config", help="INI experiment config")
        p.add_argument("--out", help="output directory (default: $MPS_OUT or [output] dir, then subcommand name)")
        if datum:
            p.add_argument("--eps", type=float)
            p.add_argument("--p", type=float)
        if grid:
            p.add_argument("--grid", help="N1xN2xN3 (default: smallest grid resolving the datum)")
            p.add_argument("--box", help="L1,L2,L3 with optional pi suffix, or 'auto'")

    p = sub.add_parser("initdata", help="build the datum and report its norms")
    common(p)
    p.add_argument("--amp", help="large | unit | <value>")
    p.add_argument("--const-C", dest="const_C", type=float)
    p.add_argument("--snapshot", action="store_true", help="write a0, U0, W0 snapshots")
    p.set_defaults(func=cmd_initdata)

    p = sub.add_parser("linear", help="decay certificate and smallness series")
    common(p)
    p.add_argument("--t-max", dest="t_max", type=float, default=2.0)
    p.add_argument("--t-samples", dest="t_samples", type=int, default=21)
    p.set_defaults(func=cmd_linear)

    p = sub.add_parser("simulate", help="integrate the full or perturbation system")
    common(p)
    p.add_argument("--mode", choices=("full", "perturbation", "oracle"), default="full")
    p.add_argument("--amp", help="large | unit | <value>")
    p.add_argument("--dt", type=float)
    p.add_argument("--t-end", dest="t_end", type=float)
    p.add_argument("--eta-mult", dest="eta_mult", type=float)
    p.add_argument("--stride", type=int)
    p.add_argument("--scheme", choices=sv.SCHEMES + tuple(sv.SCHEME_ALIASES))
    p.add_argument("--substep", choices=sv.SUBSTEPS)
    p.add_argument("--no-dealias", dest="no_dealias", action="store_true")
    p.add_argument("--pert-amp", dest="pert_amp", type=float, default=0.0, help="max |v0|, |c0| of a random perturbation")
    p.add_argument("--seed", type=int)
    p.add_argument("--snapshots", action="store_true", help="write final u, w snapshots")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("verify", help="run every invariant check")
    common(p, datum=False, grid=False)
    p.add_argument("--check", action="append", help="run only this check (repeatable)")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("scaling", help="eps sweep of the condition functional (quadrature)")
    common(p, datum=False, grid=False)
    p.add_argument("--eps-list", dest="eps_list", help="comma separated eps values")
    p.add_argument("--p", type=float)
    p.add_argument("--const-C", dest="const_C", type=float)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--largeness", action="store_true", help="also evaluate largeness metrics on grids")
    p.add_argument("--largeness-min-eps", dest="largeness_min_eps", type=float, default=1.0 / 32)
    p.set_defaults(func=cmd_scaling)

    p = sub.add_parser("report", help="summarize a simulate run directory")
    p.add_argument("run_dir")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ConfigError, UsageError, rpt.ReportError, CSVParseError, OSError) as exc:
        print(f"micropolar {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
