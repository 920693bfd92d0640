"""Dirichlet solves on balls, three-circles batteries, and basis construction.

The operator is the separated drift Laplacian acting on mode-coefficient
vectors U(r) in R^K,

    (L U)_k = u_k'' + A1(r) u_k' - (scale lam_k / phi^2) u_k
              - e(r) sum_l W_kl u_l',

optionally perturbed by compactly supported radial-drift couplings
(envelope e, symmetric matrix W).  A perturbation of this shape leaves f
radial outside a compact set, keeps constants in the kernel, and satisfies
the maximum principle, while making the interior genuinely non-separable.

Discretization: second-order finite differences on a dyadic-lattice
geometric grid (nodes 2^(t/m), m points per octave), Dirichlet data at the
top node and the exact per-mode Robin closure u_k' = (alpha_k / r) u_k at
the bottom node, which sits inside the cone plateau where the equation is
an exact Euler equation.  The assembled block-tridiagonal system is solved
through a sparse LU factorization that is reused across all trial
right-hand sides of a battery.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csc_matrix
from scipy.sparse.linalg import splu

from .errors import (ConstructionFailure, DegenerateLevel, InvalidArgument,
                     NoLimit, SolverFailure)
from .fits import PowerFit, fit_power_law
from .frequency import (ModeField, add, constant_field, separation_defect,
                        trace)
from .geometry import APProfile, drift_coefficients
from .radial import indicial_root
from .spectrum import Spectrum

DEFAULT_PTS_PER_OCTAVE = 32


# -- operator specification ---------------------------------------------------------


@dataclass(frozen=True)
class Coupling:
    """Compactly supported drift perturbation: envelope times mode matrix."""

    support: tuple[float, float]
    matrix: np.ndarray          # (K, K), symmetric

    def __post_init__(self):
        s1, s2 = self.support
        if not 0 < s1 < s2 < np.inf:
            raise InvalidArgument("coupling support must be a bounded interval")
        W = np.asarray(self.matrix, dtype=float)
        if W.ndim != 2 or W.shape[0] != W.shape[1]:
            raise InvalidArgument("coupling matrix must be square")
        if not np.allclose(W, W.T, atol=1e-12):
            raise InvalidArgument("coupling matrix must be symmetric")
        object.__setattr__(self, "matrix", W)

    def envelope(self, r) -> np.ndarray:
        """Smooth bump supported exactly on (s1, s2), max 1 at the center."""
        r = np.asarray(r, dtype=float)
        s1, s2 = self.support
        x = (2.0 * r - s1 - s2) / (s2 - s1)
        out = np.zeros_like(r)
        inside = np.abs(x) < 1.0
        out[inside] = np.exp(1.0 - 1.0 / (1.0 - x[inside] ** 2))
        return out


def random_coupling(spectrum: Spectrum, mode_cut: int, support, amplitude: float,
                    seed: int, levels=None) -> Coupling:
    """Seeded symmetric coupling with spectral norm `amplitude`.

    When `levels` is given, only those distinct-eigenvalue blocks are
    coupled; the rest of the matrix is zero, so fields supported on other
    blocks evolve exactly separably.
    """
    rng = np.random.default_rng(seed)
    W = rng.standard_normal((mode_cut, mode_cut))
    W = 0.5 * (W + W.T)
    if levels is not None:
        mask = np.zeros(mode_cut, dtype=bool)
        for k in levels:
            sl = spectrum.level_slice(k)
            mask[sl.start:min(sl.stop, mode_cut)] = True
        W[~mask, :] = 0.0
        W[:, ~mask] = 0.0
    norm = np.linalg.norm(W, 2)
    if norm > 0:
        W *= amplitude / norm
    return Coupling(support=tuple(support), matrix=W)


@dataclass(frozen=True)
class OperatorSpec:
    """Profile + spectrum + retained modes + compact couplings."""

    profile: APProfile
    spectrum: Spectrum
    mode_cut: int
    couplings: tuple[Coupling, ...] = ()

    def __post_init__(self):
        if not np.isclose(self.profile.scale, self.spectrum.scale):
            raise InvalidArgument(
                "profile and spectrum must share the same cross-section scale")
        if not 1 <= self.mode_cut <= self.spectrum.n_modes:
            raise InvalidArgument("mode_cut outside the retained mode count")
        for c in self.couplings:
            if c.matrix.shape[0] != self.mode_cut:
                raise InvalidArgument("coupling matrix size must equal mode_cut")
            if c.support[0] <= self.profile.r_cone:
                raise InvalidArgument("coupling support must avoid the cone plateau")
        object.__setattr__(self, "couplings", tuple(self.couplings))

    @property
    def separable(self) -> bool:
        return len(self.couplings) == 0

    def support_top(self) -> float:
        return max((c.support[1] for c in self.couplings), default=0.0)

    def flat_eigenvalues(self) -> np.ndarray:
        return self.spectrum.flat_eigenvalues()[: self.mode_cut]


@dataclass(frozen=True)
class BoundaryData:
    """Mode coefficients of the Dirichlet data on {r = rho}."""

    rho: float
    coeffs: np.ndarray
    provenance: str = "random"

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=float)
        if not np.all(np.isfinite(c)):
            raise InvalidArgument("boundary coefficients must be finite")
        object.__setattr__(self, "coeffs", c)


# -- the ball solver --------------------------------------------------------------


def dyadic_grid(r_cone: float, rho: float, pts_per_octave: int) -> np.ndarray:
    """Geometric nodes 2^(t/m) from just below r_cone up to exactly rho.

    All solves share the same dyadic lattice (relative to rho's octave), so
    grids of nested balls coincide on their overlap and dyadic radii are
    exact nodes.
    """
    m = pts_per_octave
    lg_top = math.log2(rho)
    t_top = round(lg_top * m)
    if abs(t_top / m - lg_top) > 1e-9:
        # rho off the lattice: fall back to anchoring the lattice at rho
        t_top = 0
        offset = lg_top
    else:
        offset = 0.0
    n_oct = math.ceil((lg_top - math.log2(r_cone)) * m) + 1
    t = np.arange(t_top - n_oct, t_top + 1)
    grid = 2.0 ** (offset + t / m)
    while grid[0] > r_cone:
        grid = np.concatenate([[grid[0] * 2 ** (-1.0 / m)], grid])
    return grid


def _derivative_weights(x: np.ndarray):
    """Second-order FD weights for u' and u'' on a nonuniform grid.

    Returns interior stencils (w1m, w10, w1p, w2m, w20, w2p) and one-sided
    first-derivative weights at both ends.
    """
    hm = x[1:-1] - x[:-2]
    hp = x[2:] - x[1:-1]
    w1m = -hp / (hm * (hm + hp))
    w10 = (hp - hm) / (hm * hp)
    w1p = hm / (hp * (hm + hp))
    w2m = 2.0 / (hm * (hm + hp))
    w20 = -2.0 / (hm * hp)
    w2p = 2.0 / (hp * (hm + hp))
    # one-sided (3-point) derivative at the first and last node
    x0, x1, x2 = x[0], x[1], x[2]
    left = np.array([
        (2 * x0 - x1 - x2) / ((x0 - x1) * (x0 - x2)),
        (x0 - x2) / ((x1 - x0) * (x1 - x2)),
        (x0 - x1) / ((x2 - x0) * (x2 - x1))])
    y0, y1, y2 = x[-1], x[-2], x[-3]
    right = np.array([
        (2 * y0 - y1 - y2) / ((y0 - y1) * (y0 - y2)),
        (y0 - y2) / ((y1 - y0) * (y1 - y2)),
        (y0 - y1) / ((y2 - y0) * (y2 - y1))])
    return w1m, w10, w1p, w2m, w20, w2p, left, right


class BallSolver:
    """Factorized Dirichlet solver on the ball {r <= rho} for one operator.

    The factorization is computed once; `solve` and `solve_many` reuse it
    for any number of boundary data, which is what makes the random-trial
    batteries cheap.
    """

    def __init__(self, op: OperatorSpec, rho: float,
                 pts_per_octave: int = DEFAULT_PTS_PER_OCTAVE):
        p = op.profile
        if rho <= 2.0 * p.r_asym:
            raise InvalidArgument("ball radius must exceed 2 r_asym")
        blend = p.r_asym - p.r_cone
        if not op.separable and rho < op.support_top() + blend:
            raise InvalidArgument(
                "boundary radius inside (or too close to) a coupling support")
        self.op = op
        self.rho = float(rho)
        self.grid = dyadic_grid(p.r_cone, rho, pts_per_octave)
        self.K = op.mode_cut
        self._assemble()

    def _assemble(self):
        op, p, K = self.op, self.op.profile, self.K
        x = self.grid
        N = x.size
        w1m, w10, w1p, w2m, w20, w2p, left, right = _derivative_weights(x)
        self._left_weights = left
        self._interior_w1 = (w1m, w10, w1p)
        coeffs = drift_coefficients(p, 0.0)
        a1 = coeffs.A1(x[1:-1])
        phi2 = p.phi(x[1:-1]) ** 2
        nus = p.scale * op.flat_eigenvalues()          # reference eigenvalues
        alphas = np.array([indicial_root(p.n, nu) for nu in nus])
        self.alphas = alphas

        rows, cols, data = [], [], []

        def put(r, c, d):
            rows.append(r)
            cols.append(c)
            data.append(d)

        ii = np.arange(1, N - 1)
        for k in range(K):
            base = ii * K + k
            diag_c = w20 + a1 * w10 - nus[k] / phi2
            put(base, (ii - 1) * K + k, w2m + a1 * w1m)
            put(base, ii * K + k, diag_c)
            put(base, (ii + 1) * K + k, w2p + a1 * w1p)

        for c in op.couplings:
            env = c.envelope(x[1:-1])
            active = np.nonzero(env > 1e-300)[0]
            if active.size == 0:
                continue
            ja = ii[active]
            ea = env[active]
            for k in range(K):
                for l in range(K):
                    w = c.matrix[k, l]
                    if w == 0.0:
                        continue
                    base = ja * K + k
                    put(base, (ja - 1) * K + l, -ea * w * w1m[active])
                    put(base, ja * K + l, -ea * w * w10[active])
                    put(base, (ja + 1) * K + l, -ea * w * w1p[active])

        # Robin closure at the bottom node (cone plateau, exact Euler data):
        # u' - (alpha/r) u = 0 with the one-sided derivative stencil.
        r0 = x[0]
        for k in range(K):
            put(np.array([k]), np.array([k]), np.array([left[0] - alphas[k] / r0]))
            put(np.array([k]), np.array([K + k]), np.array([left[1]]))
            put(np.array([k]), np.array([2 * K + k]), np.array([left[2]]))

        # Dirichlet rows at the top node.
        topbase = (N - 1) * K
        for k in range(K):
            put(np.array([topbase + k]), np.array([topbase + k]), np.array([1.0]))

        rows = np.concatenate([np.atleast_1d(r) for r in rows])
        cols = np.concatenate([np.atleast_1d(c) for c in cols])
        data = np.concatenate([np.atleast_1d(d) for d in data])
        A = csc_matrix((data, (rows, cols)), shape=(N * K, N * K))
        try:
            self._lu = splu(A)
        except RuntimeError as exc:     # singular factorization
            raise SolverFailure(f"ball solve factorization failed: {exc}") from exc
        self._right_weights = right

    # -- solving -------------------------------------------------------------------

    def solve_many(self, coeff_matrix: np.ndarray) -> np.ndarray:
        """Solve for several boundary data at once.

        coeff_matrix has shape (trials, K); returns (trials, K, N) mode
        curves.
        """
        B = np.atleast_2d(np.asarray(coeff_matrix, dtype=float))
        trials, K = B.shape
        if K != self.K:
            raise InvalidArgument("boundary data length must equal mode_cut")
        N = self.grid.size
        rhs = np.zeros((N * K, trials))
        rhs[(N - 1) * K:, :] = B.T
        sol = self._lu.solve(rhs)
        if not np.all(np.isfinite(sol)):
            raise SolverFailure("ball solve returned non-finite values")
        return np.transpose(sol.reshape(N, K, trials), (2, 1, 0))

    def _derivatives(self, curves: np.ndarray) -> np.ndarray:
        """Second-order derivative curves for (K, N) mode values."""
        x = self.grid
        w1m, w10, w1p = self._interior_w1
        d = np.empty_like(curves)
        d[:, 1:-1] = curves[:, :-2] * w1m + curves[:, 1:-1] * w10 + curves[:, 2:] * w1p
        d[:, 0] = curves[:, :3] @ self._left_weights
        d[:, -1] = curves[:, -1:-4:-1] @ self._right_weights
        return d

    def field(self, curves: np.ndarray, description="dirichlet-solve") -> ModeField:
        return ModeField(self.op.spectrum, self.grid, curves,
                         self._derivatives(curves), description=description)

    def solve_field(self, bdata: BoundaryData) -> ModeField:
        if not np.isclose(bdata.rho, self.rho, rtol=1e-12):
            raise InvalidArgument("boundary data radius does not match the solver")
        curves = self.solve_many(bdata.coeffs[None, :])[0]
        return self.field(curves)

    def level_mass(self, curves: np.ndarray, rho: float) -> float:
        """sum_k u_k(rho)^2 at an exact grid node."""
        j = int(np.argmin(np.abs(self.grid - rho)))
        if abs(self.grid[j] - rho) > 1e-9 * rho:
            raise InvalidArgument(f"radius {rho} is not a grid node")
        return float(np.sum(curves[:, j] ** 2))


def solve(op: OperatorSpec, bdata: BoundaryData,
          pts_per_octave: int = DEFAULT_PTS_PER_OCTAVE) -> ModeField:
    """One-shot Dirichlet solve; see BallSolver for the battery-friendly API."""
    return BallSolver(op, bdata.rho, pts_per_octave).solve_field(bdata)


# -- the model three-circles inequalities ------------------------------------------


def model_three_circles(a, d: float, spec: Spectrum) -> tuple[bool, bool]:
    """Evaluate the two dyadic doubling conditions for model coefficients.

    With modes a_k of eigenvalue lam_k (flat indexing, a_0 the constant):

        (i)  sum_{k>=1} a_k^2 (1 - 2^(2d - 2 lam_k)) <= a_0^2 (2^(2d) - 1)
        (ii) same with extra weights 2^(-2 lam_k) on the left.

    The first is doubling control of the outer pair of radii, the second of
    the inner pair; (i) implies (ii) for every d > 0.
    """
    if d <= 0:
        raise InvalidArgument("d must be positive")
    a = np.asarray(a, dtype=float)
    lam = spec.flat_eigenvalues()[: a.size]
    nonconst = a[1:] ** 2
    w = 1.0 - 2.0 ** (2 * d - 2 * lam[1:])
    rhs = a[0] ** 2 * (2.0 ** (2 * d) - 1.0)
    lhs1 = float(nonconst @ w)
    lhs2 = float(nonconst @ (2.0 ** (-2 * lam[1:]) * w))
    return bool(lhs1 <= rhs + 1e-14 * abs(rhs)), bool(lhs2 <= rhs + 1e-14 * abs(rhs))


def model_three_circles_batch(A: np.ndarray, d: np.ndarray,
                              spec: Spectrum) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized form of :func:`model_three_circles` for sample batteries.

    A has shape (samples, modes), d shape (samples,).  Returns boolean
    arrays (cond1, cond2).
    """
    A = np.asarray(A, dtype=float)
    d = np.asarray(d, dtype=float)
    if np.any(d <= 0):
        raise InvalidArgument("d must be positive")
    lam = spec.flat_eigenvalues()[: A.shape[1]]
    w = 1.0 - 2.0 ** (2 * d[:, None] - 2 * lam[None, 1:])
    sq = A[:, 1:] ** 2
    rhs = A[:, 0] ** 2 * (2.0 ** (2 * d) - 1.0)
    lhs1 = np.sum(sq * w, axis=1)
    lhs2 = np.sum(sq * (2.0 ** (-2 * lam[None, 1:])) * w, axis=1)
    tol = 1e-14 * np.abs(rhs)
    return lhs1 <= rhs + tol, lhs2 <= rhs + tol


# -- batteries ----------------------------------------------------------------------


@dataclass
class ViolationReport:
    """Three-circles implication counts per ladder radius."""

    d: float
    radii: np.ndarray
    trials: int
    premise_counts: np.ndarray
    violation_counts: np.ndarray

    @property
    def smallest_clean_radius(self) -> float | None:
        """Smallest ladder radius from which on no violations occur."""
        clean_from = None
        for rho, v in zip(self.radii[::-1], self.violation_counts[::-1]):
            if v == 0:
                clean_from = float(rho)
            else:
                break
        return clean_from

    def to_csv(self) -> str:
        rows = ["rho,trials,premise_holds,violations"]
        for rho, pc, vc in zip(self.radii, self.premise_counts,
                               self.violation_counts):
            rows.append(f"{rho:.16e},{self.trials},{pc},{vc}")
        return "\n".join(rows) + "\n"


def _battery_radius(op, d, rho, data, pts_per_octave):
    solver = BallSolver(op, rho, pts_per_octave)
    curves = solver.solve_many(data)
    factor = 2.0 ** (2 * d)
    premise = np.empty(data.shape[0], dtype=bool)
    violation = np.empty(data.shape[0], dtype=bool)
    for t in range(data.shape[0]):
        i_full = solver.level_mass(curves[t], rho)
        i_half = solver.level_mass(curves[t], rho / 2)
        i_quar = solver.level_mass(curves[t], rho / 4)
        premise[t] = i_full <= factor * i_half
        violation[t] = premise[t] and not (i_half <= factor * i_quar)
    return int(premise.sum()), int(violation.sum())


def three_circles_battery(op: OperatorSpec, d: float, rho_ladder, trials: int,
                          seed: int, pts_per_octave: int = 16,
                          workers: int = 1) -> ViolationReport:
    """Count violations of the dyadic doubling implication on random solves.

    For each ladder radius rho, `trials` random boundary data are solved on
    the ball of radius rho and the implication

        I(rho) <= 2^(2d) I(rho/2)   =>   I(rho/2) <= 2^(2d) I(rho/4)

    is evaluated.  Violations are data, not errors; the report carries the
    counts and the smallest radius from which on none occur.  Level masses
    drop the common geometric prefactor of I, which cancels in both sides.
    """
    lam = op.flat_eigenvalues()
    if np.any(np.abs(lam - d) < 1e-9):
        raise InvalidArgument("d must stay away from retained eigenvalues")
    radii = np.asarray(rho_ladder, dtype=float)
    rng = np.random.default_rng(seed)
    data = rng.standard_normal((trials, op.mode_cut))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_battery_radius, [op] * radii.size,
                                  [d] * radii.size, radii,
                                  [data] * radii.size,
                                  [pts_per_octave] * radii.size))
    else:
        results = [_battery_radius(op, d, rho, data, pts_per_octave)
                   for rho in radii]
    premise = np.array([r[0] for r in results])
    violations = np.array([r[1] for r in results])
    return ViolationReport(d=d, radii=radii, trials=trials,
                           premise_counts=premise, violation_counts=violations)


@dataclass
class LiouvilleReport:
    """Minimum far-ladder frequency of constant-deflated random solutions."""

    trials: int
    vacuous: int
    min_U: np.ndarray          # per non-vacuous trial
    lam2: float

    @property
    def overall_min(self) -> float:
        return float(self.min_U.min()) if self.min_U.size else np.inf

    def passed(self, slack: float = 0.05) -> bool:
        return self.overall_min >= self.lam2 - slack

    def to_csv(self) -> str:
        rows = ["trial,min_far_U"]
        for t, v in enumerate(self.min_U):
            rows.append(f"{t},{v:.16e}")
        return "\n".join(rows) + "\n"


def liouville_battery(op: OperatorSpec, trials: int, seed: int,
                      rho_big: float = 1024.0, far_ladder=None,
                      pts_per_octave: int = 16) -> LiouvilleReport:
    """Check that nothing grows slower than the first nonzero eigenvalue.

    Each trial solves random data on a large ball, subtracts the best
    constant (the mode-0 coefficient at the far reference radius), and
    measures the frequency U of the remainder along the far ladder.  Pure
    constant data leaves nothing to measure and counts as vacuous.
    """
    if trials < 1:
        raise InvalidArgument("need at least one trial")
    if far_ladder is None:
        far_ladder = np.geomspace(rho_big / 4.0, rho_big / 2.0, 9)
    far_ladder = np.asarray(far_ladder, dtype=float)
    solver = BallSolver(op, rho_big, pts_per_octave)
    rng = np.random.default_rng(seed)
    data = rng.standard_normal((trials, op.mode_cut))
    curves = solver.solve_many(data)
    p = op.profile
    rho_ref = far_ladder[-1]
    jref = int(np.argmin(np.abs(solver.grid - rho_ref)))
    mins = []
    vacuous = 0
    for t in range(trials):
        c = curves[t].copy()
        c[0] -= c[0, jref]
        mass = np.sum(c ** 2, axis=0)
        if np.max(mass) <= 1e-24 * np.max(curves[t] ** 2):
            vacuous += 1
            continue
        f = solver.field(c)
        tr = trace(f, p, far_ladder)
        mins.append(tr.U.min())
    lam2 = op.spectrum.distinct_eigenvalues[1]
    return LiouvilleReport(trials=trials, vacuous=vacuous,
                           min_U=np.array(mins), lam2=float(lam2))


# -- preservation of almost orthogonality -------------------------------------------


@dataclass(frozen=True)
class PreservationResult:
    drift: float        # left side: transported normalized inner product drift
    delta: float        # separation defect of v on the window
    d_max: float        # max U_v on the window

    def bound(self, C: float, rho1: float, rho2: float) -> float:
        return C * self.delta * (rho2 / rho1) ** (4 * self.d_max + 1)


def preservation_experiment(u: ModeField, v: ModeField, p: APProfile,
                            rho1: float, rho2: float) -> PreservationResult:
    """Drift of the normalized inner product across [rho1, rho2].

    Measures |N(rho2) - T N(rho1)| where N is the normalized level inner
    product and T the I-ratio transport factor, together with the
    separation defect delta of v and the max of U_v on the window; the
    caller compares against C * delta * (rho2/rho1)^(4 d + 1).
    """
    if not 0 < rho1 < rho2:
        raise InvalidArgument("need 0 < rho1 < rho2")
    delta2 = separation_defect(v, p, rho1, rho2)
    ladder = np.geomspace(rho1, rho2, 33)
    d_max = float(trace(v, p, ladder).U.max())

    def mode_sums(f, rho):
        vals, _ = f.values_at(rho)
        return vals

    u1, u2 = mode_sums(u, rho1), mode_sums(u, rho2)
    v1, v2 = mode_sums(v, rho1), mode_sums(v, rho2)
    nu1, nu2 = float(u1 @ u1), float(u2 @ u2)
    nv1, nv2 = float(v1 @ v1), float(v2 @ v2)
    if min(nu1, nu2, nv1, nv2) == 0.0:
        raise DegenerateLevel(rho1 if min(nu1, nv1) == 0 else rho2)
    N1 = float(u1 @ v1) / np.sqrt(nu1 * nv1)
    N2 = float(u2 @ v2) / np.sqrt(nu2 * nv2)
    T = np.sqrt((nu1 / nu2) * (nv2 / nv1))
    return PreservationResult(drift=abs(N2 - T * N1),
                              delta=float(np.sqrt(max(delta2, 0.0))),
                              d_max=d_max)


# -- construction of the asymptotically orthogonal basis ---------------------------


@dataclass
class BuildConfig:
    """Knobs of the construction pipeline (all radii dyadic).

    The increasing-ball iteration always runs out to 2^i_out so that every
    constructed field lives on the same dyadic lattice with a common top;
    the Cauchy criterion must be met by then or construction fails.
    """

    i_start: int = 9
    i_out: int = 15
    rho_bar: float = 16.0       # orthogonalization radius (8 r_asym default)
    rho_bar1: float = 32.0      # normalization radius (2 rho_bar)
    window_top: float = 256.0   # compact convergence window [r_cone, window_top]
    tol: float = 1e-5
    pts_per_octave: int = DEFAULT_PTS_PER_OCTAVE
    seed: int = 7
    rho_far: float = 1024.0     # far Gram radius
    fit_ladder: tuple = tuple(2.0 ** np.arange(4, 10))


def _mode_sums_at(fields, rho):
    return [f.values_at(rho)[0] for f in fields]


def _select_boundary_data(op: OperatorSpec, level: int, same_level_fields,
                          rho: float, tie_vector: np.ndarray,
                          prev_theta=None) -> np.ndarray:
    """Unit eigenspace vector minimizing projections onto prior members.

    Builds the Gram matrix of the prior members' normalized boundary
    restrictions projected on the level block and takes the eigenvector of
    the smallest eigenvalue.  Exact degeneracy is broken by projecting a
    fixed seeded tie vector onto the degenerate subspace, which is stable
    across the increasing-ball iteration; the sign follows the previous
    iterate for continuity.
    """
    spec = op.spectrum
    sl = spec.level_slice(level)
    m = min(sl.stop, op.mode_cut) - sl.start
    if m <= 0:
        raise InvalidArgument("level block outside retained modes")
    M = np.zeros((m, m))
    for f in same_level_fields:
        vals, _ = f.values_at(rho)
        total = float(vals @ vals)
        if total <= 0:
            continue
        b = vals[sl.start:sl.start + m] / np.sqrt(total)
        M += np.outer(b, b)
    evals, evecs = np.linalg.eigh(M)
    degenerate = evals <= evals[0] + 1e-12 * max(1.0, evals[-1])
    nd = int(degenerate.sum())
    if nd > 1:
        sub = evecs[:, :nd]
        proj = sub @ (sub.T @ tie_vector)
        norm = np.linalg.norm(proj)
        theta = proj / norm if norm > 1e-8 else evecs[:, 0]
    else:
        theta = evecs[:, 0]
    theta = theta / np.linalg.norm(theta)
    if prev_theta is not None and float(theta @ prev_theta) < 0:
        theta = -theta
    elif prev_theta is None and theta[np.argmax(np.abs(theta))] < 0:
        theta = -theta
    return theta


def construct_harmonic(op: OperatorSpec, level: int, prior_fields,
                       prior_levels, config: BuildConfig) -> ModeField:
    """Run the increasing-ball Dirichlet pipeline for one new basis member.

    For each ball radius 2^i: select boundary data in the level eigenspace
    away from prior same-level members, solve, subtract the vertex value,
    project away prior nonconstant members at rho_bar, normalize at
    rho_bar1, and stop once successive iterates are Cauchy (sup over the
    fixed compact window) below config.tol.
    """
    spec = op.spectrum
    if level == 0:
        grid = dyadic_grid(op.profile.r_cone, 2.0 ** config.i_out,
                           config.pts_per_octave)
        return constant_field(spec, grid, 1.0, n_modes=op.mode_cut)

    same_level = [f for f, lv in zip(prior_fields, prior_levels) if lv == level]
    nonconstant = [f for f, lv in zip(prior_fields, prior_levels) if lv > 0]
    rng = np.random.default_rng(config.seed + 1009 * len(same_level))
    sl0 = spec.level_slice(level)
    m_level = min(sl0.stop, op.mode_cut) - sl0.start
    tie_vector = rng.standard_normal(m_level)
    tie_vector /= np.linalg.norm(tie_vector)
    prev_iter = None
    prev_theta = None
    diffs = []
    u = None
    for i in range(config.i_start, config.i_out + 1):
        rho_i = 2.0 ** i
        solver = BallSolver(op, rho_i, config.pts_per_octave)
        theta = _select_boundary_data(op, level, same_level, rho_i, tie_vector,
                                      prev_theta)
        prev_theta = theta
        data = np.zeros(op.mode_cut)
        sl = spec.level_slice(level)
        data[sl.start:sl.start + theta.size] = theta
        u = solver.solve_field(BoundaryData(rho=rho_i, coeffs=data,
                                            provenance=f"level-{level}"))
        # vertex value = mode-0 coefficient on the cone plateau
        u.coeffs[0] -= u.coeffs[0, 0]
        u._splines = {}
        # orthogonal projection onto prior nonconstant members at rho_bar
        if nonconstant:
            restricted = [f.restricted(rho_i) for f in nonconstant]
            vs = _mode_sums_at(restricted, config.rho_bar)
            uv = u.values_at(config.rho_bar)[0]
            G = np.array([[float(a @ b) for b in vs] for a in vs])
            rhs = np.array([float(uv @ a) for a in vs])
            try:
                coef = np.linalg.solve(G, rhs)
            except np.linalg.LinAlgError as exc:
                raise ConstructionFailure(
                    "prior members degenerate at rho_bar", diagnostics=G) from exc
            u = add([u] + restricted, [1.0] + list(-coef))
        # normalize at rho_bar1
        mass = float(np.sum(u.values_at(config.rho_bar1)[0] ** 2))
        if mass <= 0:
            raise ConstructionFailure("iterate vanishes at the normalization radius")
        pref = config.rho_bar1 ** ((1 - op.profile.n) / 2.0) \
            * op.profile.phi(config.rho_bar1) ** (op.profile.n - 1)
        u = u * (1.0 / np.sqrt(pref * mass))
        if prev_iter is not None:
            # align sign with the previous iterate
            uv = u.values_at(config.rho_bar1)[0]
            pv = prev_iter.values_at(config.rho_bar1)[0]
            if float(uv @ pv) < 0:
                u = u * (-1.0)
            win = u.grid <= config.window_top * (1 + 1e-12)
            a = u.coeffs[:, win]
            b = prev_iter.coeffs[:, : a.shape[1]]
            diff = float(np.max(np.sqrt(np.sum((a - b) ** 2, axis=0))))
            diffs.append(diff)
        prev_iter = u
    if not diffs or diffs[-1] >= config.tol:
        raise ConstructionFailure(
            f"no Cauchy convergence below {config.tol} within the ball range",
            diagnostics={"cauchy_differences": diffs})
    u.description = "constructed-limit"
    return u


def asymptotic_orthogonalize(w: ModeField, u: ModeField, p: APProfile,
                             ladder) -> tuple[ModeField, float]:
    """Subtract the far-field component of w along u.

    Estimates L = lim <w,u>_rho / |u|_rho^2 along the (dyadic) ladder:
    the Cauchy differences of the ratio must decay at a fitted positive
    rate, and the last ladder value is taken as L.  Returns (w - L u, L).
    """
    ladder = np.asarray(ladder, dtype=float)
    if ladder.size < 4:
        raise InvalidArgument("need at least 4 ladder radii")
    ratios = []
    for rho in ladder:
        wv, _ = w.values_at(rho)
        uv, _ = u.values_at(rho)
        den = float(uv @ uv)
        if den == 0.0:
            raise DegenerateLevel(rho)
        ratios.append(float(wv @ uv) / den)
    ratios = np.asarray(ratios)
    dif = np.abs(np.diff(ratios))
    scale = max(1.0, float(np.max(np.abs(ratios))))
    if np.max(dif) > 1e-10 * scale:
        fit = fit_power_law(ladder[:-1], dif)
        if not fit.exact and fit.tau <= 0:
            raise NoLimit("normalized inner-product ratios do not converge "
                          f"(fitted rate {fit.tau:.3f})")
    L = float(ratios[-1])
    top = min(w.grid[-1], u.grid[-1])
    out = add([w.restricted(top), u.restricted(top)], [1.0, -L])
    return out, L


@dataclass
class HarmonicBasis:
    """Constructed basis fields with far-radius orthogonality diagnostics."""

    fields: list
    target_levels: list
    gram_far: np.ndarray
    pair_fits: dict
    base_point_values: np.ndarray
    config: BuildConfig

    @property
    def cardinality(self) -> int:
        return len(self.fields)

    def to_csv(self) -> str:
        rows = ["i,j,angle_far,fit_C,fit_tau,fit_r2,fit_exact"]
        n = len(self.fields)
        for i in range(n):
            for j in range(i + 1, n):
                f = self.pair_fits[(i, j)]
                rows.append(f"{i},{j},{self.gram_far[i, j]:.6e},"
                            f"{f.C:.6e},{f.tau:.6e},{f.r2:.6f},{int(f.exact)}")
        return "\n".join(rows) + "\n"


def build_basis(op: OperatorSpec, d: float,
                config: BuildConfig | None = None) -> HarmonicBasis:
    """Construct the full asymptotically orthogonal basis up to growth d.

    Levels are built in eigenvalue order; each new member is constructed
    with all prior members as constraints, then orthogonalized at infinity
    against the already-built members of its own level.
    """
    from .frequency import orthogonality_angle

    config = config or BuildConfig()
    spec = op.spectrum
    n_fields = spec.dimension_count(d)      # errors beyond the truncation
    fields: list[ModeField] = []
    levels: list[int] = []
    for k, lam in enumerate(spec.distinct_eigenvalues):
        if lam > d:
            break
        block = min(spec.level_slice(k).stop, op.mode_cut) - spec.level_slice(k).start
        for _ in range(block):
            u = construct_harmonic(op, k, fields, levels, config)
            for prior, lv in zip(list(fields), list(levels)):
                if lv == k and k > 0:
                    u, _ = asymptotic_orthogonalize(u, prior, op.profile,
                                                    np.asarray(config.fit_ladder))
            if k > 0:
                mass = float(np.sum(u.values_at(config.rho_bar1)[0] ** 2))
                if mass > 0:
                    u = u * (1.0 / np.sqrt(mass))
                u.description = "constructed-limit"
            fields.append(u)
            levels.append(k)
    if len(fields) != n_fields:
        raise ConstructionFailure(
            f"built {len(fields)} fields, expected {n_fields}")
    n = len(fields)
    gram = np.zeros((n, n))
    fits = {}
    ladder = np.asarray(config.fit_ladder, dtype=float)
    for i in range(n):
        gram[i, i] = 1.0
        for j in range(i + 1, n):
            top = min(fields[i].grid[-1], fields[j].grid[-1])
            rho_far = min(config.rho_far, top)
            gram[i, j] = gram[j, i] = orthogonality_angle(
                fields[i], fields[j], rho_far)
            angles = np.array([orthogonality_angle(fields[i], fields[j], rho)
                               for rho in ladder])
            fits[(i, j)] = fit_power_law(ladder, angles)
    base_vals = np.array([f.coeffs[0, 0] for f in fields])
    return HarmonicBasis(fields=fields, target_levels=levels, gram_far=gram,
                         pair_fits=fits, base_point_values=base_vals,
                         config=config)
