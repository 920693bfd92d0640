"""Independent oracles used by the test suite.

Nothing here touches the library's Parseval machinery: the reconstruction
oracle evaluates genuine spherical harmonics pointwise and integrates with
Gauss-Legendre quadrature, and the eigenvalue oracle discretizes the
Laplace-Beltrami operator on a latitude-longitude grid.  Agreement between
these and the mode-space formulas is what the oracle tests assert.
"""

import numpy as np
from scipy.linalg import eigh
from scipy.sparse import lil_matrix


def real_sphere_harmonics(x, y, z):
    """The 16 real orthonormal harmonics of degree <= 3 on the unit 2-sphere.

    Returned in degree blocks of sizes 1, 3, 5, 7 matching the flat mode
    layout of a 4-level sphere spectrum.
    """
    s = np.sqrt
    pi = np.pi
    return np.stack([
        0.5 / s(pi) * np.ones_like(x),
        s(3 / (4 * pi)) * y,
        s(3 / (4 * pi)) * z,
        s(3 / (4 * pi)) * x,
        0.5 * s(15 / pi) * x * y,
        0.5 * s(15 / pi) * y * z,
        0.25 * s(5 / pi) * (3 * z ** 2 - 1),
        0.5 * s(15 / pi) * x * z,
        0.25 * s(15 / pi) * (x ** 2 - y ** 2),
        0.25 * s(35 / (2 * pi)) * y * (3 * x ** 2 - y ** 2),
        0.5 * s(105 / pi) * x * y * z,
        0.25 * s(21 / (2 * pi)) * y * (5 * z ** 2 - 1),
        0.25 * s(7 / pi) * z * (5 * z ** 2 - 3),
        0.25 * s(21 / (2 * pi)) * x * (5 * z ** 2 - 1),
        0.25 * s(105 / pi) * z * (x ** 2 - y ** 2),
        0.25 * s(35 / (2 * pi)) * x * (x ** 2 - 3 * y ** 2),
    ])


def sphere_quadrature(n_z=24, n_phi=48):
    """Gauss-Legendre x uniform-angle nodes and weights on the unit sphere.

    Exact for polynomial integrands of the degrees that appear in products
    of degree <= 3 harmonics.
    """
    zs, wz = np.polynomial.legendre.leggauss(n_z)
    phis = 2 * np.pi * np.arange(n_phi) / n_phi
    wphi = 2 * np.pi / n_phi
    Z, PHI = np.meshgrid(zs, phis, indexing="ij")
    W = np.broadcast_to(wz[:, None] * wphi, Z.shape)
    sinth = np.sqrt(1 - Z ** 2)
    X = sinth * np.cos(PHI)
    Y = sinth * np.sin(PHI)
    return X.ravel(), Y.ravel(), Z.ravel(), W.ravel()


def harmonics_at_quadrature(n_z=24, n_phi=48):
    x, y, z, w = sphere_quadrature(n_z, n_phi)
    return real_sphere_harmonics(x, y, z), w


def reconstruct(coeff_vec, harm):
    """Pointwise field values from flat mode coefficients (unit-sphere basis)."""
    coeff_vec = np.asarray(coeff_vec, dtype=float)
    return coeff_vec @ harm[: coeff_vec.size]


def theta_samples(n=64, seed=123):
    """n quasi-random unit directions for sup-norm sampling."""
    rng = np.random.default_rng(seed)
    v = rng.standard_normal((n, 3))
    v /= np.linalg.norm(v, axis=1)[:, None]
    return real_sphere_harmonics(v[:, 0], v[:, 1], v[:, 2])


def fd_sphere_eigenvalues(n_theta, n_phi, k=10):
    """Smallest eigenvalues of -Laplace on the round unit 2-sphere by FD.

    Conservative discretization at latitude cell centers; the pole faces
    carry zero area so no special closure is needed.  The sin(theta) weight
    symmetrizes the matrix.
    """
    h = np.pi / n_theta
    hphi = 2 * np.pi / n_phi
    theta = (np.arange(n_theta) + 0.5) * h
    sin_c = np.sin(theta)
    sin_f = np.sin(np.arange(n_theta + 1) * h)      # faces, 0 at both poles

    def idx(i, j):
        return i * n_phi + (j % n_phi)

    A = lil_matrix((n_theta * n_phi, n_theta * n_phi))
    for i in range(n_theta):
        up = sin_f[i + 1] / (sin_c[i] * h * h)
        dn = sin_f[i] / (sin_c[i] * h * h)
        az = 1.0 / (sin_c[i] ** 2 * hphi * hphi)
        for j in range(n_phi):
            c = idx(i, j)
            A[c, c] = -(up + dn + 2 * az)
            if i + 1 < n_theta:
                A[c, idx(i + 1, j)] = up
            else:
                # across the pole: neighbor is the antipodal-longitude cell
                A[c, idx(i, j + n_phi // 2)] = up
            if i > 0:
                A[c, idx(i - 1, j)] = dn
            else:
                A[c, idx(i, j + n_phi // 2)] += dn
            A[c, idx(i, j + 1)] += az
            A[c, idx(i, j - 1)] += az
    d = np.sqrt(sin_c)
    D = np.repeat(d, n_phi)
    S = A.toarray()
    S = (D[:, None] * S) / D[None, :]
    S = 0.5 * (S + S.T)
    evals = eigh(-S, eigvals_only=True)
    return np.sort(evals)[:k]


def sphere_eigenvalue_oracle(k=9):
    """Richardson-extrapolated FD eigenvalues of the round unit 2-sphere."""
    coarse = fd_sphere_eigenvalues(32, 16, k)
    fine = fd_sphere_eigenvalues(64, 32, k)
    return (4 * fine - coarse) / 3.0
