"""Spectral data of the asymptotic cross-section.

The lab never touches eigenfunctions pointwise; every cross-section
computation runs through Parseval in mode coefficients.  What the rest of
the code needs from the cross-section (Sigma, g_X) is exactly the list of
distinct eigenvalues of -Laplace(g_X), their multiplicities, and a stable
indexing of the flat mode list.  Those are closed-form for the two shipped
cross-sections:

* a round sphere carrying the metric ``scale * g_round`` (the steady-soliton
  case has scale = 2(n-2)), eigenvalues l(l+dim-1)/scale;
* a flat torus with prescribed side lengths, eigenvalues
  sum_i (2 pi k_i / L_i)^2 over integer vectors.

Truncation is explicit: queries beyond the retained eigenvalues raise
rather than extending lazily, because silent truncation corrupts dimension
counts downstream.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgument, OutOfRange


@dataclass(frozen=True)
class Spectrum:
    """Distinct cross-section eigenvalues with multiplicities and mode ids.

    Attributes
    ----------
    sigma_dim : dimension of the cross-section (= n - 1 downstream).
    scale : the cross-section metric is ``scale`` times the unit reference
        metric; eigenvalues below already include the 1/scale factor.
    distinct_eigenvalues : ascending eigenvalues, starting at 0.
    multiplicities : positive multiplicities, starting at 1 (constants).
    """

    sigma_dim: int
    scale: float
    distinct_eigenvalues: tuple[float, ...]
    multiplicities: tuple[int, ...]
    description: str = "generic"
    _level_of_flat: tuple[int, ...] = field(init=False, repr=False, default=())

    def __post_init__(self):
        lam = np.asarray(self.distinct_eigenvalues, dtype=float)
        mult = np.asarray(self.multiplicities, dtype=int)
        if lam.size == 0 or lam.size != mult.size:
            raise InvalidArgument("need matching, nonempty eigenvalue/multiplicity lists")
        if abs(lam[0]) > 1e-15 or mult[0] != 1:
            raise InvalidArgument("first eigenvalue must be 0 with multiplicity 1")
        if np.any(np.diff(lam) <= 0):
            raise InvalidArgument("distinct eigenvalues must be strictly increasing")
        if np.any(mult < 1):
            raise InvalidArgument("multiplicities must be >= 1")
        if self.scale <= 0:
            raise InvalidArgument("scale must be positive")
        levels = tuple(k for k, m in enumerate(self.multiplicities) for _ in range(m))
        object.__setattr__(self, "_level_of_flat", levels)

    # -- mode bookkeeping ----------------------------------------------------

    @property
    def n_levels(self) -> int:
        return len(self.distinct_eigenvalues)

    @property
    def n_modes(self) -> int:
        """Total retained flat mode count, sum of multiplicities."""
        return len(self._level_of_flat)

    def mode_index(self, flat: int) -> tuple[int, int]:
        """Map a flat mode id to (distinct-eigenvalue index k, position j).

        Both are 0-based; j runs over 0..m_k-1.
        """
        if not 0 <= flat < self.n_modes:
            raise OutOfRange(f"flat mode id {flat} outside retained range 0..{self.n_modes - 1}")
        k = self._level_of_flat[flat]
        j = flat - self.level_offset(k)
        return k, j

    def flat_index(self, k: int, j: int) -> int:
        """Inverse of :meth:`mode_index`."""
        if not 0 <= k < self.n_levels:
            raise OutOfRange(f"level {k} outside retained range")
        if not 0 <= j < self.multiplicities[k]:
            raise OutOfRange(f"position {j} outside multiplicity {self.multiplicities[k]}")
        return self.level_offset(k) + j

    def level_offset(self, k: int) -> int:
        """Flat id of the first mode in level k."""
        return int(sum(self.multiplicities[:k]))

    def level_slice(self, k: int) -> slice:
        off = self.level_offset(k)
        return slice(off, off + self.multiplicities[k])

    def flat_eigenvalues(self) -> np.ndarray:
        """Eigenvalue per flat mode id, length :attr:`n_modes`."""
        return np.array([self.distinct_eigenvalues[k] for k in self._level_of_flat])

    def level_of_flat(self, flat: int) -> int:
        return self.mode_index(flat)[0]

    # -- queries ---------------------------------------------------------------

    def dimension_count(self, d: float) -> int:
        """Number of modes with eigenvalue <= d; 0 for d < 0.

        Raises OutOfRange when d exceeds the largest retained eigenvalue:
        the spectrum truncation would silently undercount there.
        """
        if d < 0:
            return 0
        lam = self.distinct_eigenvalues
        if d > lam[-1]:
            raise OutOfRange(
                f"d={d} exceeds largest retained eigenvalue {lam[-1]}; "
                "extend the spectrum truncation")
        return int(sum(m for lam_k, m in zip(lam, self.multiplicities) if lam_k <= d))

    # -- serialization -----------------------------------------------------------

    def to_table(self) -> str:
        """Plain-text (k, lambda_k, m_k) table for CSV reports."""
        lines = ["k,lambda,multiplicity"]
        for k, (lam, m) in enumerate(zip(self.distinct_eigenvalues, self.multiplicities)):
            lines.append(f"{k},{lam:.16e},{m}")
        return "\n".join(lines) + "\n"


def sphere_multiplicity(sphere_dim: int, ell: int) -> int:
    """Multiplicity of the l-th spherical harmonic level on S^sphere_dim."""
    from math import comb
    d = sphere_dim
    if ell == 0:
        return 1
    if ell == 1:
        return d + 1
    return comb(ell + d, ell) - comb(ell + d - 2, ell - 2)


def sphere_spectrum(sphere_dim: int, scale: float, count: int) -> Spectrum:
    """First `count` distinct eigenvalues of the scaled round sphere.

    The metric is ``scale * g_round(S^sphere_dim)``, so eigenvalues are
    l(l + sphere_dim - 1)/scale with the standard sphere multiplicities.
    """
    if sphere_dim < 1:
        raise InvalidArgument("sphere_dim must be >= 1")
    if scale <= 0:
        raise InvalidArgument("scale must be positive")
    if count < 1:
        raise InvalidArgument("count must be >= 1")
    eigs = tuple(ell * (ell + sphere_dim - 1) / scale for ell in range(count))
    mults = tuple(sphere_multiplicity(sphere_dim, ell) for ell in range(count))
    return Spectrum(sigma_dim=sphere_dim, scale=float(scale),
                    distinct_eigenvalues=eigs, multiplicities=mults,
                    description=f"sphere(dim={sphere_dim}, scale={scale})")


def torus_spectrum(lengths, count: int) -> Spectrum:
    """First `count` distinct flat-torus eigenvalues with lattice multiplicities.

    Eigenvalues are sum_i (2 pi k_i / L_i)^2 over integer vectors k, counted
    with multiplicity.  Enumeration radius grows until `count` distinct
    values are safely below the enumeration cutoff.
    """
    lengths = [float(L) for L in lengths]
    if not lengths:
        raise InvalidArgument("lengths list must be nonempty")
    if any(L <= 0 for L in lengths):
        raise InvalidArgument("all torus lengths must be positive")
    if count < 1:
        raise InvalidArgument("count must be >= 1")
    base = [(2.0 * np.pi / L) ** 2 for L in lengths]
    kmax = 1
    while True:
        counts: dict[float, int] = {}
        for vec in itertools.product(range(-kmax, kmax + 1), repeat=len(lengths)):
            val = sum(b * k * k for b, k in zip(base, vec))
            key = round(val, 12)
            counts[key] = counts.get(key, 0) + 1
        values = sorted(counts)
        # Only trust distinct values certainly complete at this cutoff: any
        # unseen lattice vector has some |k_i| = kmax + 1, hence eigenvalue
        # >= min_i b_i * (kmax+1)^2.
        safe = min(base) * (kmax + 1) ** 2
        complete = [v for v in values if v < safe]
        if len(complete) >= count:
            chosen = complete[:count]
            return Spectrum(sigma_dim=len(lengths), scale=1.0,
                            distinct_eigenvalues=tuple(float(v) for v in chosen),
                            multiplicities=tuple(counts[v] for v in chosen),
                            description=f"torus(lengths={lengths})")
        kmax *= 2


def dimension_count(spec: Spectrum, d: float) -> int:
    """Module-level alias for :meth:`Spectrum.dimension_count`."""
    return spec.dimension_count(d)
