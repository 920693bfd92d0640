"""Level-set functionals of mode fields: D, I, U, G, Q and derived checks.

A mode field stores a function on the warped manifold as per-mode radial
coefficient curves u_k(r) against the cross-section eigenbasis (orthonormal
in L^2(g_X)).  Every level-set integral is then a Parseval sum:

    I(rho) = rho^((1-n)/2) phi^(n-1) sum_k u_k^2          (squared norm)
    D(rho) = rho^((3-n)/2) phi^(n-1) sum_k u_k u_k'
    U      = D / I = rho sum u_k u_k' / sum u_k^2          (frequency)
    G      = rho sum u_k'^2 / sum u_k^2
    Q      = (scale rho / phi^2) sum lam_k u_k^2 / sum u_k^2

The scale factor in Q pairs the g_X eigenvalues with the warping
phi = sqrt(scale * r); on the plateau Q of a single mode is exactly its
eigenvalue and the frequency ODE

    U' = ((3-n)/(2 rho) + f') U - 2 U^2 / rho + G + Q

holds with no remainder, so discretization order is measurable directly.
No theta quadrature appears in the hot path; a theta-sampled reconstruction
exists only as a test oracle.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import DegenerateLevel, InvalidArgument, UndefinedRatio
from .fits import PowerFit, fit_power_law
from .geometry import APProfile
from .radial import RadialSolution
from .spectrum import Spectrum

_NODE_RTOL = 1e-12


def _centered_derivative(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Nonuniform 3-point first derivative at interior nodes (len(x)-2)."""
    hm = x[1:-1] - x[:-2]
    hp = x[2:] - x[1:-1]
    return (-hp / (hm * (hm + hp)) * y[:-2]
            + (hp - hm) / (hm * hp) * y[1:-1]
            + hm / (hp * (hm + hp)) * y[2:])


@dataclass(eq=False)
class ModeField:
    """Per-mode radial coefficient curves sharing one geometric grid."""

    spectrum: Spectrum
    grid: np.ndarray
    coeffs: np.ndarray      # (K, N)
    dcoeffs: np.ndarray     # (K, N)
    description: str = "constructed"
    _splines: dict = field(default_factory=dict, repr=False, init=False)

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=float)
        self.coeffs = np.atleast_2d(np.asarray(self.coeffs, dtype=float))
        self.dcoeffs = np.atleast_2d(np.asarray(self.dcoeffs, dtype=float))
        if self.coeffs.shape != self.dcoeffs.shape:
            raise InvalidArgument("coefficient and derivative arrays must match")
        if self.coeffs.shape[1] != self.grid.size:
            raise InvalidArgument("mode curves must share the grid")
        if self.coeffs.shape[0] > self.spectrum.n_modes:
            raise InvalidArgument("more curves than retained modes")

    # -- bookkeeping -------------------------------------------------------

    @property
    def n_modes(self) -> int:
        return self.coeffs.shape[0]

    def flat_eigenvalues(self) -> np.ndarray:
        return self.spectrum.flat_eigenvalues()[: self.n_modes]

    def copy(self, description=None) -> "ModeField":
        return ModeField(self.spectrum, self.grid, self.coeffs.copy(),
                         self.dcoeffs.copy(),
                         description or self.description)

    # -- evaluation --------------------------------------------------------

    def _node_index(self, rho: float):
        i = int(np.searchsorted(self.grid, rho))
        for j in (i - 1, i):
            if 0 <= j < self.grid.size and abs(self.grid[j] - rho) <= _NODE_RTOL * rho:
                return j
        return None

    def _spline(self, which: str) -> CubicSpline:
        if which not in self._splines:
            data = self.coeffs if which == "c" else self.dcoeffs
            self._splines[which] = CubicSpline(np.log(self.grid), data, axis=1)
        return self._splines[which]

    def values_at(self, rho: float) -> tuple[np.ndarray, np.ndarray]:
        """(u_k(rho), u_k'(rho)); exact at grid nodes, cubic in log r off-grid."""
        if not self.grid[0] <= rho <= self.grid[-1]:
            raise InvalidArgument(f"rho={rho} outside the field grid "
                                  f"[{self.grid[0]}, {self.grid[-1]}]")
        j = self._node_index(rho)
        if j is not None:
            return self.coeffs[:, j].copy(), self.dcoeffs[:, j].copy()
        x = np.log(rho)
        return self._spline("c")(x), self._spline("d")(x)

    def mode_sums(self, rho: float) -> tuple[float, float, float, float]:
        """(sum u^2, sum u u', sum u'^2, sum lam u^2) at radius rho."""
        u, du = self.values_at(rho)
        lam = self.flat_eigenvalues()
        return (float(u @ u), float(u @ du), float(du @ du),
                float((lam * u) @ u))

    # -- arithmetic -----------------------------------------------------------

    def __mul__(self, c: float) -> "ModeField":
        return ModeField(self.spectrum, self.grid, self.coeffs * c,
                         self.dcoeffs * c, self.description)

    __rmul__ = __mul__

    def restricted(self, r_max: float) -> "ModeField":
        """Field truncated to grid nodes <= r_max."""
        keep = self.grid <= r_max * (1 + _NODE_RTOL)
        return ModeField(self.spectrum, self.grid[keep], self.coeffs[:, keep],
                         self.dcoeffs[:, keep], self.description)

    def to_csv(self) -> str:
        head = ",".join(["r"] + [f"u{k}" for k in range(self.n_modes)]
                        + [f"du{k}" for k in range(self.n_modes)])
        rows = [head]
        for j, r in enumerate(self.grid):
            vals = [f"{r:.16e}"]
            vals += [f"{v:.16e}" for v in self.coeffs[:, j]]
            vals += [f"{v:.16e}" for v in self.dcoeffs[:, j]]
            rows.append(",".join(vals))
        return "\n".join(rows) + "\n"


def separable_field(spectrum: Spectrum, sol: RadialSolution, mode: int,
                    n_modes: int | None = None) -> ModeField:
    """Single-mode field carrying the radial solution in one flat slot."""
    k, _ = spectrum.mode_index(mode)
    lam = spectrum.distinct_eigenvalues[k]
    if abs(lam - sol.lam) > 1e-12 * max(1.0, lam):
        raise InvalidArgument(
            f"mode {mode} has eigenvalue {lam}, radial solution has {sol.lam}")
    K = spectrum.n_modes if n_modes is None else n_modes
    if mode >= K:
        raise InvalidArgument("mode outside the retained count")
    R, Rp = sol.values()
    coeffs = np.zeros((K, sol.grid.size))
    dcoeffs = np.zeros_like(coeffs)
    coeffs[mode] = R
    dcoeffs[mode] = Rp
    return ModeField(spectrum, sol.grid, coeffs, dcoeffs, description="separable")


def add(fields, weights) -> ModeField:
    """Coefficient-wise weighted sum of fields on a shared grid."""
    fields = list(fields)
    weights = list(weights)
    if not fields or len(fields) != len(weights):
        raise InvalidArgument("need one weight per field")
    first = fields[0]
    for f in fields[1:]:
        if f.grid.shape != first.grid.shape or not np.allclose(
                f.grid, first.grid, rtol=_NODE_RTOL, atol=0.0):
            raise InvalidArgument("fields must share the radial grid")
        if f.spectrum is not first.spectrum and f.spectrum != first.spectrum:
            raise InvalidArgument("fields must share the spectrum")
        if f.n_modes != first.n_modes:
            raise InvalidArgument("fields must retain the same mode count")
    coeffs = sum(w * f.coeffs for w, f in zip(weights, fields))
    dcoeffs = sum(w * f.dcoeffs for w, f in zip(weights, fields))
    return ModeField(first.spectrum, first.grid, coeffs, dcoeffs,
                     description="sum")


def constant_field(spectrum: Spectrum, grid, value: float = 1.0,
                   n_modes: int | None = None) -> ModeField:
    """The constant solution: mode-0 curve identically `value`."""
    grid = np.asarray(grid, dtype=float)
    K = spectrum.n_modes if n_modes is None else n_modes
    coeffs = np.zeros((K, grid.size))
    coeffs[0] = value
    return ModeField(spectrum, grid, coeffs, np.zeros_like(coeffs),
                     description="separable")


# -- level-set functionals ---------------------------------------------------------


def _prefactor(p: APProfile, rho: float) -> float:
    return rho ** ((1 - p.n) / 2.0) * p.phi(rho) ** (p.n - 1)


def level_inner(u: ModeField, v: ModeField, rho: float, p: APProfile) -> float:
    """Normalized level-set inner product (Parseval in mode space)."""
    uu, _ = u.values_at(rho)
    vv, _ = v.values_at(rho)
    if uu.size != vv.size:
        raise InvalidArgument("fields must retain the same mode count")
    return _prefactor(p, rho) * float(uu @ vv)


def orthogonality_angle(u: ModeField, v: ModeField, rho: float) -> float:
    """|<u,v>| / (|u| |v|) on {r = rho}; prefactors cancel."""
    uu, _ = u.values_at(rho)
    vv, _ = v.values_at(rho)
    nu = float(uu @ uu)
    nv = float(vv @ vv)
    if nu == 0.0 or nv == 0.0:
        raise DegenerateLevel(rho)
    return abs(float(uu @ vv)) / np.sqrt(nu * nv)


@dataclass
class FrequencyTrace:
    """D, I, U, G, Q sampled along a radius ladder."""

    rho: np.ndarray
    D: np.ndarray
    I: np.ndarray
    U: np.ndarray
    G: np.ndarray
    Q: np.ndarray
    n: int
    profile: APProfile

    def cauchy_schwarz_gap(self) -> np.ndarray:
        """G - U^2/rho >= 0, with equality exactly on single-mode data."""
        return self.G - self.U ** 2 / self.rho

    def to_csv(self) -> str:
        rows = ["rho,D,I,U,G,Q"]
        for vals in zip(self.rho, self.D, self.I, self.U, self.G, self.Q):
            rows.append(",".join(f"{v:.16e}" for v in vals))
        return "\n".join(rows) + "\n"


def trace(u: ModeField, p: APProfile, ladder) -> FrequencyTrace:
    """Fill a frequency trace along the ladder (must lie in the grid range)."""
    ladder = np.asarray(ladder, dtype=float)
    if np.any(np.diff(ladder) <= 0):
        raise InvalidArgument("ladder must be strictly increasing")
    D = np.empty_like(ladder)
    I = np.empty_like(ladder)
    U = np.empty_like(ladder)
    G = np.empty_like(ladder)
    Q = np.empty_like(ladder)
    for i, rho in enumerate(ladder):
        s0, s1, s2, sl = u.mode_sums(rho)
        if s0 <= 0.0:
            raise DegenerateLevel(rho)
        pref = _prefactor(p, rho)
        I[i] = pref * s0
        D[i] = rho * pref * s1
        U[i] = rho * s1 / s0
        G[i] = rho * s2 / s0
        Q[i] = (p.scale * rho / p.phi(rho) ** 2) * sl / s0
    return FrequencyTrace(rho=ladder, D=D, I=I, U=U, G=G, Q=Q, n=p.n, profile=p)


def frequency_ode_residual(t: FrequencyTrace, p: APProfile) -> np.ndarray:
    """U'_numeric minus the frequency ODE right-hand side, interior points.

    Second-order in the ladder spacing; the continuum identity is exact on
    the plateau so the residual measures pure discretization error there.
    """
    rho = t.rho
    if rho.size < 3:
        raise InvalidArgument("need at least 3 ladder points")
    rel = np.diff(rho) / rho[:-1]
    if np.any(rel > 0.05):
        raise InvalidArgument("ladder too coarse for centered differences "
                              f"(max relative spacing {rel.max():.3f} > 0.05)")
    dU = _centered_derivative(rho, t.U)
    mid = slice(1, -1)
    rhs = ((3.0 - t.n) / (2.0 * rho[mid]) + p.fp(rho[mid])) * t.U[mid] \
        - 2.0 * t.U[mid] ** 2 / rho[mid] + t.G[mid] + t.Q[mid]
    return dU - rhs


def i_log_derivative_check(t: FrequencyTrace) -> np.ndarray:
    """(log I)'_numeric - 2U/rho at interior ladder points."""
    rho = t.rho
    if rho.size < 3:
        raise InvalidArgument("need at least 3 ladder points")
    rel = np.diff(rho) / rho[:-1]
    if np.any(rel > 0.05):
        raise InvalidArgument("ladder too coarse for centered differences")
    dlogI = _centered_derivative(rho, np.log(t.I))
    mid = slice(1, -1)
    return dlogI - 2.0 * t.U[mid] / rho[mid]


# -- almost separation and deflation ----------------------------------------------


def deflate_constant(u: ModeField, rho_ref: float) -> tuple[ModeField, float]:
    """Subtract the best constant (mode-0 projection at rho_ref).

    Returns (deflated field, subtracted constant).  Needed before
    separation-defect and Liouville analyses when the constant component
    would make U degenerate.
    """
    c = float(u.values_at(rho_ref)[0][0])
    out = u.copy(description=u.description + "+deflated")
    out.coeffs = out.coeffs.copy()
    out.coeffs[0] = out.coeffs[0] - c
    out._splines = {}
    return out, c


def separation_defect(u: ModeField, p: APProfile, rho1: float, rho2: float,
                      pts_per_decade: int = 128) -> float:
    """Squared almost-separation defect over the annulus [rho1, rho2].

    Trapezoid quadrature of (G/U - U/rho) D over a geometric ladder,
    normalized by I(rho2).  The integrand is nonnegative (Cauchy-Schwarz),
    vanishing exactly for single-mode fields.  Raises when U vanishes in
    the window: the constant component dominates and must be deflated first.
    """
    if not 0 < rho1 < rho2:
        raise InvalidArgument("need 0 < rho1 < rho2")
    npts = max(9, int(np.ceil(pts_per_decade * np.log10(rho2 / rho1))) + 1)
    ladder = np.geomspace(rho1, rho2, npts)
    t = trace(u, p, ladder)
    if np.any(t.U <= 0.0):
        raise UndefinedRatio(
            "U vanishes inside the window; deflate the constant component")
    integrand = (t.G / t.U - t.U / t.rho) * t.D
    return float(np.trapezoid(integrand, t.rho) / t.I[-1])


# -- pinching reports --------------------------------------------------------------


@dataclass
class PinchReport:
    """Measured closeness of a field to a single growth level."""

    lam_target: float
    ladder: np.ndarray
    u_fit: PowerFit            # |U - lam| decay
    q_fit: PowerFit            # |Q - lam| decay
    uq_fit: PowerFit           # |U - Q| decay (needs rate >= 1/3)
    projection_ratio: np.ndarray
    projection_fit: PowerFit   # decay of 1 - |P_level u| / |u|
    separation_windows: np.ndarray
    separation_delta: np.ndarray
    separation_fit: PowerFit   # decay of the windowed defect delta

    @property
    def passed(self) -> bool:
        ok_u = self.u_fit.exact or (self.u_fit.tau > 0 and self.u_fit.accepted)
        ok_q = self.q_fit.exact or (self.q_fit.tau > 0 and self.q_fit.accepted)
        ok_uq = self.uq_fit.exact or self.uq_fit.tau >= 1.0 / 3.0
        ok_proj = self.projection_fit.exact or self.projection_fit.tau > 0
        ok_sep = self.separation_fit.exact or self.separation_fit.tau > 0
        return ok_u and ok_q and ok_uq and ok_proj and ok_sep

    def to_csv(self) -> str:
        rows = ["quantity,C,tau,r2,exact"]
        for name, f in [("abs_U_minus_lam", self.u_fit),
                        ("abs_Q_minus_lam", self.q_fit),
                        ("abs_U_minus_Q", self.uq_fit),
                        ("one_minus_projection", self.projection_fit),
                        ("separation_delta", self.separation_fit)]:
            rows.append(f"{name},{f.C:.6e},{f.tau:.6e},{f.r2:.6f},{int(f.exact)}")
        return "\n".join(rows) + "\n"


def projection_ratio(u: ModeField, level: int, rho: float) -> float:
    """|P_level u| / |u| on {r = rho} (mode-block norm fraction)."""
    vals, _ = u.values_at(rho)
    total = float(vals @ vals)
    if total == 0.0:
        raise DegenerateLevel(rho)
    block = u.spectrum.level_slice(level)
    return float(np.sqrt((vals[block] @ vals[block]) / total))


def pinching_report(u: ModeField, p: APProfile, lam_target: float,
                    ladder=None) -> PinchReport:
    """Fit the four pinching diagnostics of a candidate growth-lam field."""
    spec = u.spectrum
    matches = [k for k, lam in enumerate(spec.distinct_eigenvalues)
               if abs(lam - lam_target) <= 1e-9 * max(1.0, lam_target)]
    if not matches:
        raise InvalidArgument(f"target {lam_target} is not a retained eigenvalue")
    level = matches[0]
    if ladder is None:
        lo = max(4.0 * p.r_asym, u.grid[0] * 1.0001)
        hi = u.grid[-1] / 4.0
        ladder = np.geomspace(lo, hi, 33)
    ladder = np.asarray(ladder, dtype=float)
    t = trace(u, p, ladder)
    u_fit = fit_power_law(ladder, np.abs(t.U - lam_target))
    q_fit = fit_power_law(ladder, np.abs(t.Q - lam_target))
    uq_fit = fit_power_law(ladder, np.abs(t.U - t.Q))
    proj = np.array([projection_ratio(u, level, rho) for rho in ladder])
    proj_fit = fit_power_law(ladder, 1.0 - proj)
    windows = ladder[ladder * 2.0 <= u.grid[-1]][::4]
    deltas = np.array([np.sqrt(max(separation_defect(u, p, rho, 2 * rho), 0.0))
                       for rho in windows])
    sep_fit = fit_power_law(windows, deltas)
    return PinchReport(lam_target=lam_target, ladder=ladder, u_fit=u_fit,
                       q_fit=q_fit, uq_fit=uq_fit, projection_ratio=proj,
                       projection_fit=proj_fit, separation_windows=windows,
                       separation_delta=deltas, separation_fit=sep_fit)


def mean_value_ratio(u: ModeField, p: APProfile, rho: float, tau: float) -> float:
    """Interior sup mass over the weighted I integral, bounded along ladders.

    Numerator: max over grid nodes r <= (1 - tau) rho of the level mass
    sum_k u_k(r)^2.  Denominator: rho^(-(n+1)/2) integral of
    s^((n-1)/2) I(s) over [rho/32, rho] (clipped to the grid).  The ratio
    is scale-invariant in u and stays bounded in rho for drift-harmonic
    fields; trend checks catch violations.
    """
    if not 0.0 < tau < 0.5:
        raise InvalidArgument("tau must lie in (0, 1/2)")
    if rho > u.grid[-1] * (1 + 1e-12):
        raise InvalidArgument("rho outside the field grid")
    cut = (1.0 - tau) * rho
    interior = u.grid <= cut
    if not interior.any():
        raise InvalidArgument("no grid points inside the sup region")
    sup_mass = float(np.max(np.sum(u.coeffs[:, interior] ** 2, axis=0)))
    lo = max(rho / 32.0, u.grid[0])
    seg = (u.grid >= lo) & (u.grid <= rho * (1 + 1e-12))
    s = u.grid[seg]
    I_vals = _prefactor_vec(p, s) * np.sum(u.coeffs[:, seg] ** 2, axis=0)
    integral = float(np.trapezoid(s ** ((p.n - 1) / 2.0) * I_vals, s))
    denom = rho ** (-(p.n + 1) / 2.0) * integral
    if denom == 0.0:
        raise DegenerateLevel(rho)
    return sup_mass / denom


def _prefactor_vec(p: APProfile, s: np.ndarray) -> np.ndarray:
    return s ** ((1 - p.n) / 2.0) * p.phi(s) ** (p.n - 1)
