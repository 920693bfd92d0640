"""Experiment runner: wires configurations to the lab and writes artifacts.

Every subcommand writes CSV files plus a manifest (config echo, seed, and a
timestamp; the CSV bodies themselves are byte-identical across reruns of
the same config).  Exit codes: 0 all enabled checks pass, 1 a check failed,
2 usage or config error.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

import numpy as np

from . import (ap_certificate, solve_radial, separable_field, trace,
               frequency_ode_residual, i_log_derivative_check)
from .config import RunConfig
from .dirichlet import build_basis, liouville_battery, three_circles_battery
from .errors import InvalidArgument
from .frequency import add
from .verification import run_acceptance

EXIT_PASS = 0
EXIT_CHECK_FAILED = 1
EXIT_USAGE = 2


def _load_config(args) -> RunConfig:
    if args.config:
        cfg = RunConfig.from_file(args.config)
    else:
        cfg = RunConfig()
    if args.seed is not None:
        cfg.seed = args.seed
    if args.workers is not None:
        cfg.workers = args.workers
    if args.out is not None:
        cfg.out_dir = args.out
    if args.strict:
        cfg.strict = True
    return cfg


def _outdir(cfg: RunConfig, name: str) -> Path:
    path = Path(cfg.out_dir) / name
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write_manifest(out: Path, cfg: RunConfig, artifacts) -> None:
    lines = [f"generated_at: {time.strftime('%Y-%m-%dT%H:%M:%S')}",
             f"seed: {cfg.seed}",
             "artifacts:"]
    lines += [f"  - {a}" for a in artifacts]
    lines += ["config: |"]
    lines += ["  " + ln for ln in cfg.to_text().splitlines()]
    (out / "manifest.txt").write_text("\n".join(lines) + "\n")


def cmd_certify(cfg: RunConfig) -> int:
    out = _outdir(cfg, "certify")
    report = ap_certificate(cfg.profile())
    (out / "certificate.csv").write_text(report.to_csv())
    _write_manifest(out, cfg, ["certificate.csv"])
    print(report)
    if not report.passed:
        print(f"certify: FAILED on {', '.join(report.failing_lines())}")
        return EXIT_CHECK_FAILED
    return EXIT_PASS


def cmd_radial(cfg: RunConfig) -> int:
    out = _outdir(cfg, "radial")
    spec = cfg.spectrum()
    p = cfg.profile()
    artifacts = []
    status = EXIT_PASS
    for k, lam in enumerate(spec.distinct_eigenvalues):
        sol = solve_radial(p, lam, 1e5,
                           pts_per_decade=cfg.radial_pts_per_decade)
        name = f"radial_level{k}.csv"
        (out / name).write_text(sol.to_csv())
        artifacts.append(name)
        flag = " FLAGGED(regression-vs-frequency)" if sol.flagged else ""
        print(f"level {k}: lambda={lam:g} growth_exponent="
              f"{sol.growth_exponent:.6f}{flag}")
        if sol.flagged:
            status = EXIT_CHECK_FAILED
    _write_manifest(out, cfg, artifacts)
    return status


def cmd_freq(cfg: RunConfig) -> int:
    out = _outdir(cfg, "freq")
    spec = cfg.spectrum()
    p = cfg.profile()
    artifacts = []
    fields = {}
    for k in range(1, spec.n_levels):
        lam = spec.distinct_eigenvalues[k]
        sol = solve_radial(p, lam, 1e4, pts_per_decade=512)
        fields[k] = separable_field(spec, sol, spec.level_offset(k))
    mixture = add([fields[1], fields[2]], [1.0, 1e-3])
    grid = fields[1].grid
    ladder = grid[(grid >= 8.0) & (grid <= 2e3)][::4]
    status = EXIT_PASS
    for name, f in [("mode1", fields[1]), ("mixture", mixture)]:
        t = trace(f, p, ladder)
        res_ode = frequency_ode_residual(t, p)
        res_ilog = i_log_derivative_check(t)
        rows = ["rho,D,I,U,G,Q,ode_residual,ilog_residual"]
        for i, rho in enumerate(t.rho):
            ro = res_ode[i - 1] if 0 < i < t.rho.size - 1 else float("nan")
            ri = res_ilog[i - 1] if 0 < i < t.rho.size - 1 else float("nan")
            rows.append(",".join(f"{v:.16e}" for v in
                                 (rho, t.D[i], t.I[i], t.U[i], t.G[i], t.Q[i],
                                  ro, ri)))
        fname = f"trace_{name}.csv"
        (out / fname).write_text("\n".join(rows) + "\n")
        artifacts.append(fname)
        gap = t.cauchy_schwarz_gap().min()
        print(f"{name}: max|ode residual|={np.nanmax(np.abs(res_ode)):.3e} "
              f"min gap={gap:.3e}")
        if gap < -1e-10:
            status = EXIT_CHECK_FAILED
    _write_manifest(out, cfg, artifacts)
    return status


def cmd_threecircles(cfg: RunConfig) -> int:
    out = _outdir(cfg, "threecircles")
    radii = 2.0 ** np.arange(cfg.battery_i_lo, cfg.battery_i_hi + 1)
    artifacts = []
    status = EXIT_PASS
    for coupled, ds, clean_from in ((False, (0.5, 2.0, 4.5), 2.0 ** 6),
                                    (True, (2.0,), 2.0 ** 8)):
        op = cfg.operator(coupled=coupled)
        tag = "coupled" if coupled else "separable"
        for d in ds:
            rep = three_circles_battery(
                op, d, radii, trials=200, seed=cfg.seed,
                pts_per_octave=cfg.battery_pts_per_octave,
                workers=cfg.workers)
            name = f"threecircles_{tag}_d{d}.csv"
            (out / name).write_text(rep.to_csv())
            artifacts.append(name)
            bad = int(rep.violation_counts[radii >= clean_from].sum())
            print(f"{tag} d={d}: violations beyond {clean_from:g}: {bad} "
                  f"(clean from {rep.smallest_clean_radius})")
            if bad:
                status = EXIT_CHECK_FAILED
    _write_manifest(out, cfg, artifacts)
    return status


def cmd_liouville(cfg: RunConfig) -> int:
    out = _outdir(cfg, "liouville")
    op = cfg.operator(coupled=True)
    rep = liouville_battery(op, trials=100, seed=cfg.seed,
                            pts_per_octave=cfg.battery_pts_per_octave)
    (out / "liouville.csv").write_text(rep.to_csv())
    _write_manifest(out, cfg, ["liouville.csv"])
    ok = rep.passed(cfg.liouville_slack)
    print(f"min far-ladder U = {rep.overall_min:.4f} "
          f"(needs >= {rep.lam2 - cfg.liouville_slack:.4f}); "
          f"{'PASS' if ok else 'FAIL'}")
    return EXIT_PASS if ok else EXIT_CHECK_FAILED


def cmd_basis(cfg: RunConfig) -> int:
    out = _outdir(cfg, "basis")
    artifacts = []
    status = EXIT_PASS
    for coupled in (False, True):
        tag = "coupled" if coupled else "separable"
        op = cfg.operator(coupled=coupled)
        basis = build_basis(op, 3.0, cfg.build_config())
        name = f"basis_{tag}_gram.csv"
        (out / name).write_text(basis.to_csv())
        artifacts.append(name)
        for idx, f in enumerate(basis.fields):
            fname = f"basis_{tag}_field{idx}.csv"
            (out / fname).write_text(f.to_csv())
            artifacts.append(fname)
        off = float(np.max(np.abs(basis.gram_far - np.eye(basis.cardinality))))
        print(f"{tag}: {basis.cardinality} fields, max far angle {off:.2e}")
        if basis.cardinality != op.spectrum.dimension_count(3.0) \
                or off >= cfg.gram_tol:
            status = EXIT_CHECK_FAILED
    _write_manifest(out, cfg, artifacts)
    return status


def cmd_verify(cfg: RunConfig) -> int:
    out = _outdir(cfg, "verify")
    results = run_acceptance(cfg)
    rows = ["check,claim,passed,runtime_s,details"]
    all_pass = True
    for res in results:
        details = ";".join(f"{k}={v}" for k, v in res.measured.items())
        rows.append(f"{res.check_id},\"{res.claim}\",{int(res.passed)},"
                    f"{res.runtime:.2f},\"{details}\"")
        print(res.row())
        all_pass &= res.passed
        if cfg.strict and res.warnings:
            all_pass = False
    (out / "verify_report.csv").write_text("\n".join(rows) + "\n")
    _write_manifest(out, cfg, ["verify_report.csv"])
    print("verification:", "PASS" if all_pass else "FAIL")
    return EXIT_PASS if all_pass else EXIT_CHECK_FAILED


COMMANDS = {
    "certify": cmd_certify,
    "radial": cmd_radial,
    "freq": cmd_freq,
    "threecircles": cmd_threecircles,
    "liouville": cmd_liouville,
    "basis": cmd_basis,
    "verify": cmd_verify,
}


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="driftlab",
        description="Numerical laboratory for polynomial-growth drift-harmonic "
                    "functions on paraboloidal warped products.")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", help="key-value config file")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--seed", type=int, help="override the run seed")
    parser.add_argument("--workers", type=int, help="worker pool size")
    parser.add_argument("--strict", action="store_true",
                        help="treat fit-quality warnings as failures")
    return parser


def main(argv=None) -> int:
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else 0
    try:
        cfg = _load_config(args)
    except (InvalidArgument, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return COMMANDS[args.command](cfg)
    except InvalidArgument as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
