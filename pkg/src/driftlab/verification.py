"""The acceptance battery: one callable per verified claim.

Each check returns a CheckResult whose `measured` dict carries the numbers
a reviewer wants to see.  The CLI `verify` subcommand and the acceptance
test module both run these, so there is exactly one source of truth for
what the lab asserts about itself.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import (add, flow_derivative_check, flow_map, indicial_root,
               lg_exponent_check, mean_value_ratio, pinching_report,
               separable_field, solve_radial, trace)
from .config import RunConfig
from .dirichlet import (BallSolver, BoundaryData, build_basis,
                        liouville_battery, model_three_circles_batch,
                        preservation_experiment, random_coupling,
                        three_circles_battery, OperatorSpec)
from .fits import fit_power_law, loglog_slope
from .frequency import (deflate_constant, frequency_ode_residual,
                        i_log_derivative_check)


@dataclass
class CheckResult:
    check_id: str
    claim: str
    measured: dict = field(default_factory=dict)
    passed: bool = False
    runtime: float = 0.0
    warnings: list = field(default_factory=list)

    def row(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        details = " ".join(f"{k}={_fmt(v)}" for k, v in self.measured.items())
        return f"{status}  {self.check_id}: {details}"


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.4g}"
    return str(v)


def _timed(fn):
    def wrapper(cfg: RunConfig) -> CheckResult:
        t0 = time.perf_counter()
        result = fn(cfg)
        result.runtime = time.perf_counter() - t0
        return result
    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


# -- 1: radial growth ---------------------------------------------------------------


@_timed
def check_radial_growth(cfg: RunConfig) -> CheckResult:
    """Fitted growth exponents match the cross-section eigenvalues."""
    p = cfg.profile()
    spec = cfg.spectrum()
    lams = [lam for lam in spec.distinct_eigenvalues if lam > 0]
    measured = {}
    passed = True
    worst_fit = 0.0
    worst_cross = 0.0
    max_time = 0.0
    for lam in lams:
        t0 = time.perf_counter()
        sol = solve_radial(p, lam, 1e5, pts_per_decade=cfg.radial_pts_per_decade)
        dt = time.perf_counter() - t0
        max_time = max(max_time, dt)
        err_fit = abs(sol.growth_exponent - lam)
        err_cross = abs(sol.growth_exponent - sol.u_at_rmax)
        worst_fit = max(worst_fit, err_fit)
        worst_cross = max(worst_cross, err_cross)
        passed &= err_fit <= cfg.growth_tol and err_cross <= cfg.growth_tol
    measured["max_exponent_error"] = worst_fit
    measured["max_regression_vs_frequency"] = worst_cross
    measured["max_seconds_per_lam"] = max_time
    passed &= max_time < 1.0
    return CheckResult("radial-growth",
                       "regular radial solutions grow like r^lambda",
                       measured, passed)


# -- 2: indicial and Liouville-Green structure --------------------------------------


@_timed
def check_indicial_lg(cfg: RunConfig) -> CheckResult:
    """Vertex exponents solve the indicial equation; phase expansions decay."""
    p = cfg.profile()
    spec = cfg.spectrum()
    worst_res = 0.0
    for n in (3, 4, 5, 7):
        for lam in (0.0, 0.5, 1.0, 3.0, 6.0, 17.25):
            a = indicial_root(n, lam)
            worst_res = max(worst_res, abs(a * (a + n - 2) - lam))
    r = np.geomspace(1e3, 1e5, 41)
    worst_exponent = np.inf
    for lam in spec.distinct_eigenvalues:
        first, second = lg_exponent_check(p, lam, r)
        for comp in (first, second):
            fit = fit_power_law(r, np.abs(comp))
            if not fit.exact:
                worst_exponent = min(worst_exponent, fit.tau)
    passed = worst_res < 1e-12 and worst_exponent >= 1.9
    return CheckResult("indicial-liouville-green",
                       "vertex and infinity expansions match the normal form",
                       {"max_indicial_residual": worst_res,
                        "min_lg_decay_exponent": worst_exponent}, passed)


# -- 3: frequency identities --------------------------------------------------------


@_timed
def check_frequency_identities(cfg: RunConfig) -> CheckResult:
    """Second-order residual convergence and Cauchy-Schwarz gap signs."""
    p = cfg.profile()
    spec = cfg.spectrum()
    fine = 2048
    sol1 = solve_radial(p, spec.distinct_eigenvalues[1], 1e4,
                        pts_per_decade=fine)
    sol3 = solve_radial(p, spec.distinct_eigenvalues[2], 1e4,
                        pts_per_decade=fine)
    u1 = separable_field(spec, sol1, spec.level_offset(1))
    u3 = separable_field(spec, sol3, spec.level_offset(2))
    mix = add([u1, u3], [1.0, 1e-4])
    maxima = {}
    for step in (8, 4):       # 256 and 512 ladder points per decade
        lad = sol1.grid[(sol1.grid >= 16.0) & (sol1.grid <= 2e3)][::step]
        t = trace(mix, p, lad)
        r_ode = np.abs(frequency_ode_residual(t, p))
        r_ilog = np.abs(i_log_derivative_check(t))
        maxima[step] = (r_ode.max(), r_ilog.max())
    f_ode = maxima[8][0] / maxima[4][0]
    f_ilog = maxima[8][1] / maxima[4][1]

    rng = np.random.default_rng(cfg.seed)
    probe = sol1.grid[(sol1.grid >= 8.0) & (sol1.grid <= 4e3)][::64]
    min_gap = np.inf
    fields = [u1, u3]
    for _ in range(1000):
        w = rng.standard_normal(2)
        f = add(fields, list(w))
        t = trace(f, p, probe)
        min_gap = min(min_gap, float(t.cauchy_schwarz_gap().min()))
    single_gap = 0.0
    for f in fields:
        t = trace(f, p, probe)
        single_gap = max(single_gap, float(np.abs(t.cauchy_schwarz_gap()).max()))
    passed = (3.5 <= f_ode <= 4.5 and 3.5 <= f_ilog <= 4.5
              and min_gap >= -1e-10 and single_gap < 1e-10)
    return CheckResult("frequency-identities",
                       "frequency ODE and norm-derivative residuals are "
                       "second order; Rayleigh gap is signed",
                       {"ode_halving_factor": f_ode,
                        "ilog_halving_factor": f_ilog,
                        "min_mixed_gap": min_gap,
                        "max_single_mode_gap": single_gap}, passed)


# -- 4: model three circles ---------------------------------------------------------


@_timed
def check_model_three_circles(cfg: RunConfig) -> CheckResult:
    """Dyadic doubling implication holds on 1e5 random samples, with rigidity."""
    spec = cfg.spectrum()
    rng = np.random.default_rng(cfg.seed)
    n_samples = 100_000
    A = rng.standard_normal((n_samples, spec.n_modes))
    lam = spec.flat_eigenvalues()
    d = rng.uniform(0.05, float(lam.max()) + 2.0, n_samples)
    for v in spec.distinct_eigenvalues:
        bad = np.abs(d - v) < 1e-6
        d[bad] += 2e-6
    c1, c2 = model_three_circles_batch(A, d, spec)
    counterexamples = int(np.sum(c1 & ~c2))

    # rigidity: block-supported data at d = lam_k with zero constant part
    rigid_ok = True
    for k in range(1, spec.n_levels):
        a = np.zeros(spec.n_modes)
        sl = spec.level_slice(k)
        a[sl] = rng.standard_normal(sl.stop - sl.start)
        dk = spec.distinct_eigenvalues[k]
        w = 1.0 - 2.0 ** (2 * dk - 2 * lam[1:])
        lhs1 = float((a[1:] ** 2) @ w)
        lhs2 = float((a[1:] ** 2) @ (2.0 ** (-2 * lam[1:]) * w))
        rigid_ok &= abs(lhs1) < 1e-12 and abs(lhs2) < 1e-12
    passed = counterexamples == 0 and rigid_ok
    return CheckResult("model-three-circles",
                       "outer doubling control implies inner doubling control",
                       {"samples": n_samples, "counterexamples": counterexamples,
                        "rigidity_exact": rigid_ok}, passed)


# -- 5: three-circles battery -------------------------------------------------------


@_timed
def check_three_circles_battery(cfg: RunConfig) -> CheckResult:
    """Doubling implication on real solves, separable and coupled."""
    radii = 2.0 ** np.arange(cfg.battery_i_lo, cfg.battery_i_hi + 1)
    op = cfg.operator(coupled=False)
    opc = cfg.operator(coupled=True)
    measured = {}
    passed = True
    for d in (0.5, 2.0, 4.5):
        rep = three_circles_battery(op, d, radii, trials=200, seed=cfg.seed,
                                    pts_per_octave=cfg.battery_pts_per_octave,
                                    workers=cfg.workers)
        bad = int(rep.violation_counts[radii >= 2.0 ** 6].sum())
        measured[f"separable_d{d}_violations_beyond_64"] = bad
        passed &= bad == 0
    repc = three_circles_battery(opc, 2.0, radii, trials=200, seed=cfg.seed,
                                 pts_per_octave=cfg.battery_pts_per_octave,
                                 workers=cfg.workers)
    badc = int(repc.violation_counts[radii >= 2.0 ** 8].sum())
    measured["coupled_d2.0_violations_beyond_256"] = badc
    passed &= badc == 0
    return CheckResult("three-circles-battery",
                       "doubling implication holds at large radii on solves",
                       measured, passed)


# -- 6: dimension count and basis ---------------------------------------------------


def _basis_diagnostics(basis, cfg):
    n = basis.cardinality
    off = 0.0
    worst_tau = np.inf
    worst_r2 = 1.0
    for i in range(n):
        for j in range(i + 1, n):
            off = max(off, abs(basis.gram_far[i, j]))
            f = basis.pair_fits[(i, j)]
            if not f.exact:
                worst_tau = min(worst_tau, f.tau)
                worst_r2 = min(worst_r2, f.r2)
    return off, worst_tau, worst_r2


@_timed
def check_dimension_and_basis(cfg: RunConfig) -> CheckResult:
    """Basis cardinalities match the eigenvalue counting; pairs decouple."""
    bc = cfg.build_config()
    expected = {0.5: 1, 1.0: 4, 3.0: 9}
    measured = {}
    passed = True
    basis_store = {}
    for coupled in (False, True):
        op = cfg.operator(coupled=coupled)
        tag = "coupled" if coupled else "separable"
        for d, want in expected.items():
            b = build_basis(op, d, bc)
            basis_store[(coupled, d)] = b
            measured[f"{tag}_d{d}_cardinality"] = b.cardinality
            passed &= b.cardinality == want
        b3 = basis_store[(coupled, 3.0)]
        off, tau, r2 = _basis_diagnostics(b3, cfg)
        measured[f"{tag}_max_far_angle"] = off
        measured[f"{tag}_min_pair_tau"] = tau
        measured[f"{tag}_min_pair_r2"] = r2
        passed &= off < cfg.gram_tol
        passed &= (tau == np.inf) or (tau > 0 and r2 >= 0.95)
    result = CheckResult("dimension-and-basis",
                         "basis size equals the mode count below the growth "
                         "cap; members become orthogonal at infinity",
                         measured, passed)
    result.basis_store = basis_store
    return result


# -- 7: pinching --------------------------------------------------------------------


@_timed
def check_pinching(cfg: RunConfig) -> CheckResult:
    """Constructed fields pin frequency and Rayleigh quotient to one level."""
    op = cfg.operator(coupled=True)
    b = build_basis(op, 3.0, cfg.build_config())
    spec = op.spectrum
    measured = {}
    passed = True
    min_uq = np.inf
    for idx, (u, k) in enumerate(zip(b.fields, b.target_levels)):
        if k == 0:
            continue
        lam = spec.distinct_eigenvalues[k]
        rep = pinching_report(u, op.profile, lam)
        ok = rep.passed
        if not rep.uq_fit.exact:
            min_uq = min(min_uq, rep.uq_fit.tau)
        measured[f"field{idx}_passed"] = ok
        passed &= ok
    measured["min_UQ_decay_rate"] = min_uq
    passed &= min_uq >= 1.0 / 3.0
    return CheckResult("pinching",
                       "every non-constant member has pinched frequency, "
                       "Rayleigh quotient and projections",
                       measured, passed)


# -- 8: Liouville property ----------------------------------------------------------


@_timed
def check_liouville(cfg: RunConfig) -> CheckResult:
    """Constant-deflated solutions grow at least at the first nonzero rate."""
    op = cfg.operator(coupled=True)
    rep = liouville_battery(op, trials=100, seed=cfg.seed,
                            rho_big=1024.0,
                            pts_per_octave=cfg.battery_pts_per_octave)
    passed = rep.passed(cfg.liouville_slack)
    return CheckResult("liouville",
                       "nothing nonconstant grows slower than the first "
                       "nonzero eigenvalue",
                       {"min_far_U": rep.overall_min, "lam2": rep.lam2,
                        "vacuous_trials": rep.vacuous}, passed)


# -- 9: potential flow --------------------------------------------------------------


@_timed
def check_flow_map(cfg: RunConfig) -> CheckResult:
    """The potential flow is a unit-speed inward translation up to a constant."""
    p = cfg.profile()
    worst = 0.0
    for r in np.geomspace(10.0, 1e3, 8):
        for frac in np.linspace(0.0, 0.9, 7):
            t = frac * r
            worst = max(worst, abs(flow_map(p, r, t) - (r - t)))
    resid = 0.0
    for r in (10.0, 50.0, 400.0):
        for frac in (0.2, 0.5, 0.85):
            resid = max(resid, flow_derivative_check(p, r, frac * r))
    passed = worst <= 5.0 and resid < 1e-6
    return CheckResult("flow-map",
                       "flow stays within a constant of r - t and satisfies "
                       "the derivative ratio identity",
                       {"max_translation_gap": worst,
                        "max_derivative_residual": resid}, passed)


# -- 10: preservation of almost orthogonality ----------------------------------------


@_timed
def check_preservation(cfg: RunConfig) -> CheckResult:
    """Inner-product drift is controlled by the separation defect."""
    spec = cfg.spectrum()
    p = cfg.profile()
    opc = cfg.operator(coupled=True)
    rho_out = 2.0 ** 9
    solver = BallSolver(opc, rho_out, pts_per_octave=cfg.dirichlet_pts_per_octave)
    rng = np.random.default_rng(cfg.seed)
    c_req = []
    for _ in range(50):
        fu = solver.field(solver.solve_many(rng.standard_normal((1, opc.mode_cut)))[0])
        fv = solver.field(solver.solve_many(rng.standard_normal((1, opc.mode_cut)))[0])
        # the defect of v is only defined once the constant mode is deflated
        fv, _ = deflate_constant(fv, 64.0)
        res = preservation_experiment(fu, fv, p, 4.0, 64.0)
        if res.delta > 0:
            c_req.append(res.drift / (res.delta * (64.0 / 4.0) ** (4 * res.d_max + 1)))
    c_star = float(np.max(c_req))

    # windows beyond the support, v in a block the coupling leaves alone
    op_block = cfg.operator(coupled=True, levels=[0, 1])
    sb = BallSolver(op_block, 2.0 ** 10,
                    pts_per_octave=cfg.dirichlet_pts_per_octave)
    sl = spec.level_slice(2)
    worst_drift = 0.0
    for j in range(sl.start, min(sl.stop, op_block.mode_cut)):
        data = np.zeros(op_block.mode_cut)
        data[j] = 1.0
        fv = sb.solve_field(BoundaryData(rho=2.0 ** 10, coeffs=data))
        fu = sb.solve_field(BoundaryData(
            rho=2.0 ** 10, coeffs=rng.standard_normal(op_block.mode_cut)))
        res = preservation_experiment(fu, fv, p, 32.0, 256.0)
        worst_drift = max(worst_drift, res.drift)
    passed = np.isfinite(c_star) and c_star < 100.0 and worst_drift < 1e-8
    return CheckResult("preservation",
                       "normalized inner products transport across annuli "
                       "up to the separation defect",
                       {"fitted_C": c_star,
                        "max_drift_beyond_support": worst_drift}, passed)


# -- 11: mean-value ratio -----------------------------------------------------------


@_timed
def check_mean_value(cfg: RunConfig) -> CheckResult:
    """Interior sup mass stays controlled by the weighted norm integral."""
    opc = cfg.operator(coupled=True)
    solver = BallSolver(opc, 2.0 ** 11,
                        pts_per_octave=cfg.battery_pts_per_octave)
    rng = np.random.default_rng(cfg.seed)
    curves = solver.solve_many(rng.standard_normal((20, opc.mode_cut)))
    rhos = 2.0 ** np.arange(6, 11)
    worst_slope = -np.inf
    for tcurves in curves:
        f = solver.field(tcurves)
        ratios = np.array([mean_value_ratio(f, opc.profile, rho, 0.25)
                           for rho in rhos])
        worst_slope = max(worst_slope, loglog_slope(rhos, ratios))
    passed = worst_slope <= 0.05
    return CheckResult("mean-value-ratio",
                       "sup-over-integral ratios show no upward trend",
                       {"max_loglog_slope": worst_slope}, passed)


ALL_CHECKS = [
    ("1", check_radial_growth),
    ("2", check_indicial_lg),
    ("3", check_frequency_identities),
    ("4", check_model_three_circles),
    ("5", check_three_circles_battery),
    ("6", check_dimension_and_basis),
    ("7", check_pinching),
    ("8", check_liouville),
    ("9", check_flow_map),
    ("10", check_preservation),
    ("11", check_mean_value),
]


def run_acceptance(cfg: RunConfig | None = None, only=None):
    """Run the acceptance checks; returns the list of CheckResults."""
    cfg = cfg or RunConfig()
    results = []
    for num, fn in ALL_CHECKS:
        if only is not None and num not in only:
            continue
        results.append(fn(cfg))
    return results
