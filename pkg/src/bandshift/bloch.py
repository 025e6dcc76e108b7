"""Floquet eigenproblem in a truncated plane-wave basis.

The fiber operator at quasi-momentum k acts on lattice-periodic functions;
in the plane-wave basis indexed by dual-lattice vectors g the matrix is

    H(k)[i, j] = |k + g_i|^2 delta_ij + Vhat(g_i - g_j).

Bands are returned sorted ascending, repeated by multiplicity.  Band indices
`p` in this module are 1-based, matching the usual lambda_1 <= lambda_2 <= ...
enumeration.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product

import numpy as np
import scipy.linalg

from .errors import (
    DegenerateBandError,
    EigensolverError,
    EmptyBasisError,
    ValidationError,
)
from .lattice import DualLattice, Lattice

_HERMITIAN_TOL = 1e-14
_RESIDUAL_TOL = 1e-8
_DEGENERACY_TOL = 1e-8
_BATCH_CHUNK = 512


@dataclass(frozen=True)
class FourierPotential:
    """Real periodic potential given by its lattice Fourier coefficients.

    `coefficients` maps integer index tuples m (so g = sum_i m_i e*_i) to
    complex amplitudes.  Reality of V requires Vhat(-m) == conj(Vhat(m)).
    """

    coefficients: dict
    cutoff_norm: float | None = None

    def __post_init__(self):
        coeffs = {tuple(int(i) for i in m): complex(v) for m, v in self.coefficients.items()}
        object.__setattr__(self, "coefficients", coeffs)
        dims = {len(m) for m in coeffs}
        if len(dims) > 1:
            raise ValidationError("potential index tuples have mixed dimensions")
        for m, v in coeffs.items():
            neg = tuple(-i for i in m)
            if neg not in coeffs or abs(np.conj(coeffs[neg]) - v) > _HERMITIAN_TOL * (1.0 + abs(v)):
                raise ValidationError(
                    f"potential is not real: Vhat{m} and Vhat{neg} are not conjugate"
                )
        if self.cutoff_norm is not None and self.cutoff_norm <= 0:
            raise ValidationError("cutoff_norm must be positive")

    @classmethod
    def free(cls) -> "FourierPotential":
        return cls({})

    @classmethod
    def mathieu(cls, amplitude: float = 1.0) -> "FourierPotential":
        """1D potential V(y) = 2*amplitude*cos(e* y): Vhat(+-1) = amplitude."""
        return cls({(1,): amplitude, (-1,): amplitude})

    @property
    def dimension(self) -> int | None:
        for m in self.coefficients:
            return len(m)
        return None

    def sup_bound(self) -> float:
        """Upper bound on sup|V| (triangle inequality on the Fourier sum)."""
        return float(sum(abs(v) for v in self.coefficients.values()))

    def fingerprint(self) -> tuple:
        items = tuple(sorted((m, (v.real, v.imag)) for m, v in self.coefficients.items()))
        return (items, self.cutoff_norm)


@dataclass(frozen=True)
class BlochProblem:
    """Immutable description of P(k) = (D+k)^2 + V with basis cutoff |g| <= g_max."""

    lattice: Lattice
    dual: DualLattice
    potential: FourierPotential
    g_max: float
    m_indices: np.ndarray = field(init=False, repr=False)
    gvecs: np.ndarray = field(init=False, repr=False)
    _vmat: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.g_max <= 0:
            raise ValidationError("g_max must be positive")
        n = self.lattice.n
        if self.dual.n != n:
            raise ValidationError("lattice/dual dimension mismatch")
        pdim = self.potential.dimension
        if pdim is not None and pdim != n:
            raise ValidationError("potential dimension does not match lattice")

        inv = np.linalg.inv(self.dual.basis)
        bounds = [int(np.ceil(self.g_max * np.linalg.norm(inv[i]))) for i in range(n)]
        ms = []
        for m in product(*[range(-b, b + 1) for b in bounds]):
            g = self.dual.basis @ np.array(m, dtype=float)
            if np.linalg.norm(g) <= self.g_max + 1e-12:
                ms.append(m)
        if not ms:
            raise EmptyBasisError("plane-wave basis is empty")
        ms.sort()
        m_indices = np.array(ms, dtype=int)
        object.__setattr__(self, "m_indices", m_indices)
        object.__setattr__(self, "gvecs", m_indices @ self.dual.basis.T)

        cutoff = self.potential.cutoff_norm
        if cutoff is not None:
            for m in self.potential.coefficients:
                if np.linalg.norm(self.dual.basis @ np.array(m, dtype=float)) > cutoff + 1e-12:
                    raise ValidationError(f"potential coefficient {m} lies outside cutoff_norm")

        # k-independent potential block, filled once
        nb = len(ms)
        index = {m: i for i, m in enumerate(ms)}
        vmat = np.zeros((nb, nb), dtype=complex)
        for dm, v in self.potential.coefficients.items():
            for j, mj in enumerate(ms):
                mi = tuple(mj[a] + dm[a] for a in range(n))
                i = index.get(mi)
                if i is not None:
                    vmat[i, j] += v
        object.__setattr__(self, "_vmat", vmat)

    @property
    def n(self) -> int:
        return self.lattice.n

    @property
    def basis_size(self) -> int:
        return self.m_indices.shape[0]

    def fingerprint(self) -> tuple:
        return (
            self.lattice.basis.tobytes(),
            self.potential.fingerprint(),
            float(self.g_max),
        )


@dataclass(frozen=True)
class BandSet:
    """Eigenvalues (and optionally eigenvectors) of P(k) at one k-point."""

    k: np.ndarray
    values: np.ndarray
    vectors: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "k", np.atleast_1d(np.asarray(self.k, dtype=float)))
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        if np.any(np.diff(self.values) < -1e-12):
            raise ValidationError("band values must be sorted nondecreasing")


def assemble_pk(problem: BlochProblem, k) -> np.ndarray:
    """Hermitian matrix of P(k) in the plane-wave basis."""
    k = np.atleast_1d(np.asarray(k, dtype=float))
    if not np.all(np.isfinite(k)):
        raise ValidationError("k must be finite")
    kin = np.sum((k[None, :] + problem.gvecs) ** 2, axis=1)
    h = problem._vmat.copy()
    h[np.diag_indices_from(h)] += kin
    return h


def _assemble_batch(problem: BlochProblem, kpts: np.ndarray) -> np.ndarray:
    kin = np.sum((kpts[:, None, :] + problem.gvecs[None, :, :]) ** 2, axis=2)
    h = np.broadcast_to(problem._vmat, (kpts.shape[0],) + problem._vmat.shape).copy()
    idx = np.arange(problem.basis_size)
    h[:, idx, idx] += kin
    return h


def band_values_on_grid(problem: BlochProblem, kpts, p_max: int) -> np.ndarray:
    """First p_max band values at each of the (N, n) k-points, shape (N, p_max)."""
    kpts = np.atleast_2d(np.asarray(kpts, dtype=float))
    if p_max < 1 or p_max > problem.basis_size:
        raise ValidationError(f"p_max must be in [1, {problem.basis_size}]")
    out = np.empty((kpts.shape[0], p_max))
    for start in range(0, kpts.shape[0], _BATCH_CHUNK):
        chunk = kpts[start : start + _BATCH_CHUNK]
        vals = np.linalg.eigvalsh(_assemble_batch(problem, chunk))
        out[start : start + chunk.shape[0]] = vals[:, :p_max]
    return out


def solve_bands(problem: BlochProblem, k, p_max: int, with_vectors: bool = True) -> BandSet:
    """Solve P(k) for the lowest p_max bands, with residual-checked eigenpairs."""
    if p_max < 1 or p_max > problem.basis_size:
        raise ValidationError(f"p_max must be in [1, {problem.basis_size}]")
    h = assemble_pk(problem, k)
    if not with_vectors:
        vals = np.linalg.eigvalsh(h)[:p_max]
        return BandSet(k, vals)
    try:
        vals, vecs = scipy.linalg.eigh(h)
    except scipy.linalg.LinAlgError as exc:
        raise EigensolverError(f"eigensolver failed at k={k}", k=k) from exc
    vals = vals[:p_max]
    vecs = vecs[:, :p_max]
    resid = np.linalg.norm(h @ vecs - vecs * vals[None, :], axis=0)
    bad = resid > _RESIDUAL_TOL * (1.0 + np.abs(vals))
    if np.any(bad):
        raise EigensolverError(
            f"eigenpair residual {resid[bad].max():.3e} above tolerance at k={k}", k=k
        )
    # fix phases: largest-magnitude coefficient real positive
    lead = np.argmax(np.abs(vecs), axis=0)
    phases = vecs[lead, np.arange(vecs.shape[1])]
    vecs = vecs * np.where(np.abs(phases) > 0, np.conj(phases) / np.abs(phases), 1.0)[None, :]
    return BandSet(k, vals, vecs)


def _simplicity_gap(values: np.ndarray, p: int) -> float:
    lam = values[p - 1]
    gaps = []
    if p - 2 >= 0:
        gaps.append(lam - values[p - 2])
    if p < len(values):
        gaps.append(values[p] - lam)
    return min(gaps) if gaps else np.inf


def band_gradient(problem: BlochProblem, k, p: int) -> np.ndarray:
    """Gradient of lambda_p at k via the Hellmann-Feynman identity.

    Requires lambda_p simple; raises DegenerateBandError otherwise (callers
    should perturb k or fall back to finite differences of sorted values).
    """
    n_solve = min(p + 1, problem.basis_size)
    bands = solve_bands(problem, k, n_solve, with_vectors=True)
    lam = bands.values[p - 1]
    if _simplicity_gap(bands.values, p) <= _DEGENERACY_TOL * (1.0 + abs(lam)):
        raise DegenerateBandError(f"band {p} degenerate at k={k}")
    v = bands.vectors[:, p - 1]
    weights = np.abs(v) ** 2
    kvec = np.atleast_1d(np.asarray(k, dtype=float))
    return 2.0 * np.sum((kvec[None, :] + problem.gvecs) * weights[:, None], axis=0)


def band_laplacian(problem: BlochProblem, k, p: int, step: float | None = None) -> float:
    """k-Laplacian of lambda_p via central differences with one Richardson halving."""
    k = np.atleast_1d(np.asarray(k, dtype=float))
    if step is None:
        step = 1e-3 * problem.dual.diameter()
    n = problem.n

    def second_diff(h: float) -> float:
        pts = [k]
        for axis in range(n):
            e = np.zeros(n)
            e[axis] = h
            pts.extend([k + e, k - e])
        vals = band_values_on_grid(problem, np.array(pts), min(p + 1, problem.basis_size))
        for row in vals:
            if _simplicity_gap(row, p) <= _DEGENERACY_TOL * (1.0 + abs(row[p - 1])):
                raise DegenerateBandError(f"band {p} degenerate on FD stencil near k={k}")
        lam0 = vals[0, p - 1]
        total = 0.0
        for axis in range(n):
            lp = vals[1 + 2 * axis, p - 1]
            lm = vals[2 + 2 * axis, p - 1]
            total += (lp - 2.0 * lam0 + lm) / h**2
        return total

    coarse = second_diff(step)
    fine = second_diff(step / 2.0)
    return (4.0 * fine - coarse) / 3.0
