"""Outward shooting for the separated radial equation.

For each cross-section eigenvalue lam > 0 the regular solution grows like
r^lam at infinity while the complementary branch decays like
e^-r * r^(-(n-1)/2 - lam); outward integration therefore self-corrects and
no two-sided matching is needed.  On the cone plateau the equation is an
exact Euler equation, so the launch data at r_cone carries no vertex
truncation error: R(r_cone) = r_cone^alpha, R'(r_cone) = alpha r_cone^(alpha-1)
with alpha the nonnegative indicial root for the reference eigenvalue
scale * lam.

Values can overflow for large growth rates; the integrator rescales the
state by powers of two and keeps the exponent in a ledger, so the stored
solution is exact up to floating point in the mantissa/exponent split.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .errors import InvalidArgument, SolverFailure
from .geometry import APProfile, _hermite_quintic, drift_coefficients

_RESCALE_LIMIT = 2.0 ** 512
_DEFAULT_RTOL = 1e-10


def _scalar_system(p: APProfile, lam: float):
    """Plain-float RHS and Jacobian of the first-order radial system.

    The decaying complementary branch e^-r makes the system stiff at large
    radii, so the integrator is LSODA (nonstiff/stiff switching); a tight
    scalar RHS keeps its cost per step negligible.
    """
    n1 = p.n - 1
    rc, ra = p.r_cone, p.r_asym
    nodes = p._phi_nodes
    wb = ra - rc
    nu = p.scale * lam
    tail = p.f_tail
    tc = 0.0 if tail is None else tail.c
    tp = 1.0 if tail is None else tail.p

    def coeffs(r):
        if r >= ra:
            a1 = n1 * 0.5 / r + 1.0
            if tc:
                a1 += tc * r ** (-tp)
            a0 = -nu / (p.scale * r)
        elif r <= rc:
            a1 = n1 / r
            a0 = -nu / (r * r)
        else:
            t = (r - rc) / wb
            val, der, _ = _hermite_quintic(t, *nodes)
            sm = t * t * t * (10.0 - 15.0 * t + 6.0 * t * t)
            a1 = n1 * (der / wb) / val + sm
            a0 = -nu / (val * val)
        return a1, a0

    def rhs(r, y):
        a1, a0 = coeffs(r)
        return (y[1], -a1 * y[1] - a0 * y[0])

    def jac(r, _y):
        a1, a0 = coeffs(r)
        return np.array([[0.0, 1.0], [-a0, -a1]])

    return rhs, jac


def indicial_root(n: int, lam: float) -> float:
    """Nonnegative root of alpha (alpha + n - 2) = lam."""
    if n < 3:
        raise InvalidArgument("n must be >= 3")
    if lam < 0:
        raise InvalidArgument("lam must be nonnegative")
    return 0.5 * (-(n - 2) + math.sqrt((n - 2) ** 2 + 4.0 * lam))


@dataclass(frozen=True)
class RadialSolution:
    """Sampled regular radial solution for one eigenvalue.

    R and Rprime are stored as mantissa arrays times 2**exp2 (per-sample
    exponent ledger); `values()` reconstructs plain floats where safe.
    """

    lam: float
    n: int
    scale: float
    grid: np.ndarray
    R_mantissa: np.ndarray
    Rprime_mantissa: np.ndarray
    exp2: np.ndarray
    alpha: float
    growth_exponent: float
    normalization: float
    u_at_rmax: float

    @property
    def flagged(self) -> bool:
        """True when regression and frequency cross-check disagree by > 5e-3."""
        return abs(self.growth_exponent - self.u_at_rmax) > 5e-3

    def values(self):
        """(R, R') as plain float arrays; overflows raise."""
        with np.errstate(over="raise"):
            factor = np.exp2(self.exp2.astype(float))
            return self.R_mantissa * factor, self.Rprime_mantissa * factor

    def log2_R(self) -> np.ndarray:
        """log2 |R| on the grid, immune to overflow."""
        return np.log2(np.abs(self.R_mantissa)) + self.exp2

    def frequency(self) -> np.ndarray:
        """U(r) = r R'/R on the grid (mantissa ratio, exponent cancels)."""
        return self.grid * self.Rprime_mantissa / self.R_mantissa

    def ratio_at(self, r_from: float, r_to: float) -> float:
        """R(r_to)/R(r_from) by interpolation of log2 R (both must be > 0)."""
        lg = np.interp(np.log(np.asarray([r_from, r_to])), np.log(self.grid),
                       self.log2_R())
        return float(2.0 ** (lg[1] - lg[0]))

    def to_csv(self) -> str:
        R, Rp = self.values()
        rows = [f"# lambda={self.lam:.16e} n={self.n} alpha={self.alpha:.16e} "
                f"growth_exponent={self.growth_exponent:.16e}",
                "r,R,Rprime,U"]
        U = self.frequency()
        for r, a, b, u in zip(self.grid, R, Rp, U):
            rows.append(f"{r:.16e},{a:.16e},{b:.16e},{u:.16e}")
        return "\n".join(rows) + "\n"


def _geometric_grid(r0: float, r1: float, pts_per_decade: int) -> np.ndarray:
    n = max(2, int(np.ceil(pts_per_decade * np.log10(r1 / r0))))
    return np.geomspace(r0, r1, n + 1)


def solve_radial(p: APProfile, lam: float, r_max: float,
                 pts_per_decade: int = 64, rtol: float = _DEFAULT_RTOL,
                 initial_data: tuple[float, float] | None = None) -> RadialSolution:
    """Integrate the regular radial solution out to r_max.

    For lam = 0 the constant solution is returned directly.  The growth
    exponent is a log-log regression of R over the top decade
    [r_max/10, r_max]; the frequency value U(r_max) = r R'/R serves as an
    independent cross-check (the `flagged` property trips when the two
    disagree by more than 5e-3: blend-region contamination).

    `initial_data` overrides the exact Euler launch data; used by the
    vertex-sensitivity checks.
    """
    if lam < 0:
        raise InvalidArgument("lam must be nonnegative")
    if r_max < 100.0 * p.r_asym:
        raise InvalidArgument("r_max must be at least 100 * r_asym")
    grid = _geometric_grid(p.r_cone, r_max, pts_per_decade)

    if lam == 0.0:
        ones = np.ones_like(grid)
        return RadialSolution(
            lam=0.0, n=p.n, scale=p.scale, grid=grid,
            R_mantissa=ones, Rprime_mantissa=np.zeros_like(grid),
            exp2=np.zeros(grid.size, dtype=np.int64), alpha=0.0,
            growth_exponent=0.0, normalization=1.0, u_at_rmax=0.0)

    alpha = indicial_root(p.n, p.scale * lam)
    if initial_data is None:
        y = np.array([p.r_cone ** alpha, alpha * p.r_cone ** (alpha - 1.0)])
    else:
        y = np.array(initial_data, dtype=float)

    rhs, jac = _scalar_system(p, lam)

    R_m = np.empty_like(grid)
    Rp_m = np.empty_like(grid)
    exp2 = np.zeros(grid.size, dtype=np.int64)
    R_m[0], Rp_m[0] = y
    shift = 0
    # Integrate in chunks so the power-of-two rescaling can run between
    # chunks without touching the integrator state mid-flight.
    splits = np.unique(np.concatenate(
        [[0], np.searchsorted(grid, np.geomspace(grid[0], grid[-1], 24)),
         [grid.size - 1]]))
    for a, b in zip(splits[:-1], splits[1:]):
        if b <= a:
            continue
        seg = grid[a:b + 1]
        sol = solve_ivp(rhs, (seg[0], seg[-1]), y, method="LSODA", jac=jac,
                        t_eval=seg[1:], rtol=rtol, atol=0.0)
        if not sol.success:
            raise SolverFailure(f"radial integration failed at lam={lam}: {sol.message}")
        R_m[a + 1:b + 1] = sol.y[0]
        Rp_m[a + 1:b + 1] = sol.y[1]
        exp2[a + 1:b + 1] = shift
        y = sol.y[:, -1].copy()
        m = max(abs(y[0]), abs(y[1]))
        if m > _RESCALE_LIMIT:
            k = int(np.ceil(np.log2(m / _RESCALE_LIMIT))) + 8
            y /= 2.0 ** k
            shift += k

    log2R = np.log2(np.abs(R_m)) + exp2
    top = grid >= r_max / 10.0
    slope, _ = np.polyfit(np.log2(grid[top]), log2R[top], 1)
    growth = float(slope)
    u_rmax = float(grid[-1] * Rp_m[-1] / R_m[-1])
    norm = float(2.0 ** (log2R[-1] - growth * np.log2(grid[-1])))
    return RadialSolution(
        lam=float(lam), n=p.n, scale=p.scale, grid=grid, R_mantissa=R_m,
        Rprime_mantissa=Rp_m, exp2=exp2, alpha=alpha, growth_exponent=growth,
        normalization=norm, u_at_rmax=u_rmax)


def monotonicity_check(sol: RadialSolution) -> bool:
    """True iff R > 0 and R' > 0 at every grid point (lam > 0 only)."""
    if sol.lam <= 0:
        raise InvalidArgument("monotonicity applies to lam > 0 solutions")
    return bool(np.all(sol.R_mantissa > 0) and np.all(sol.Rprime_mantissa > 0))


def lg_exponent_check(p: APProfile, lam: float, r) -> tuple:
    """Residuals of the two Liouville-Green phase expansions at radius r.

    Returns (q^(1/2) - A1/2 - lam/r,  -q^(1/2) - A1/2 + 1 + (n-1+2 lam)/(2r));
    both are O(r^-2) on the paraboloidal plateau, which callers verify with
    a decay fit.  Raises if q < 0 (cannot happen on the plateau; flags a
    profile bug).
    """
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr < p.r_asym):
        raise InvalidArgument("Liouville-Green check applies for r >= r_asym")
    coeffs = drift_coefficients(p, lam)
    q = coeffs.q(r_arr)
    if np.any(q < 0):
        raise SolverFailure("negative Liouville-Green potential on the plateau")
    sq = np.sqrt(q)
    a1 = coeffs.A1(r_arr)
    first = sq - 0.5 * a1 - lam / r_arr
    second = -sq - 0.5 * a1 + 1.0 + (p.n - 1 + 2.0 * lam) / (2.0 * r_arr)
    return first, second


def ode_residual(sol: RadialSolution, p: APProfile) -> np.ndarray:
    """Finite-difference residual R'' + A1 R' + A0 R on the output grid.

    Uses the stored R' for the first derivative and a nonuniform centered
    difference of R' for R''; second-order in the grid spacing.
    """
    r = sol.grid
    R, Rp = sol.R_mantissa, sol.Rprime_mantissa  # common exponent cancels in the residual scale
    coeffs = drift_coefficients(p, sol.lam)
    hm = r[1:-1] - r[:-2]
    hp = r[2:] - r[1:-1]
    Rpp = 2.0 * (hm * R[2:] - (hm + hp) * R[1:-1] + hp * R[:-2]) / (hm * hp * (hm + hp))
    mid = slice(1, -1)
    res = Rpp + coeffs.A1(r[mid]) * Rp[mid] + coeffs.A0(r[mid]) * R[mid]
    # Exponent ledger changes between chunks would corrupt the stencil;
    # mask stencil windows that straddle a rescale.
    same = (sol.exp2[2:] == sol.exp2[:-2]) & (sol.exp2[1:-1] == sol.exp2[:-2])
    res[~same] = 0.0
    return res


def growth_exponent_profile(p: APProfile, lams, r_max: float = 1e4,
                            **kw) -> np.ndarray:
    """Fitted growth exponents for a list of eigenvalues (convenience)."""
    return np.array([solve_radial(p, lam, r_max, **kw).growth_exponent
                     for lam in lams])
