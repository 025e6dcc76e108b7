"""Lattices, dual lattices, and Brillouin-zone quadrature grids.

Conventions: basis vectors are the *columns* of the basis matrix.  The
fundamental domain of the dual lattice is the centered box in dual-basis
coordinates, coordinates in [-1/2, 1/2), lower edge included.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np

from .errors import DegenerateLatticeError, ValidationError

TWO_PI = 2.0 * np.pi


def _frozen_array(obj, name, value):
    arr = np.array(value, dtype=float)
    arr.setflags(write=False)
    object.__setattr__(obj, name, arr)


@dataclass(frozen=True)
class Lattice:
    """A full-rank lattice in R^n, generated by the columns of `basis`."""

    basis: np.ndarray

    def __post_init__(self):
        _frozen_array(self, "basis", self.basis)
        if self.basis.ndim != 2 or self.basis.shape[0] != self.basis.shape[1]:
            raise ValidationError("lattice basis must be a square matrix")
        det = np.linalg.det(self.basis)
        if abs(det) < 1e-12 * max(1.0, float(np.abs(self.basis).max()) ** self.n):
            raise DegenerateLatticeError("lattice generators are linearly dependent")

    @property
    def n(self) -> int:
        return self.basis.shape[0]

    @property
    def cell_volume(self) -> float:
        return abs(float(np.linalg.det(self.basis)))


@dataclass(frozen=True)
class DualLattice:
    """Dual lattice: columns satisfy <e_i, e*_j> = 2*pi*delta_ij."""

    basis: np.ndarray

    def __post_init__(self):
        _frozen_array(self, "basis", self.basis)
        if self.basis.ndim != 2 or self.basis.shape[0] != self.basis.shape[1]:
            raise ValidationError("dual basis must be a square matrix")
        if abs(np.linalg.det(self.basis)) == 0.0:
            raise DegenerateLatticeError("dual basis is singular")

    @property
    def n(self) -> int:
        return self.basis.shape[0]

    @property
    def cell_volume(self) -> float:
        """Volume of the Brillouin zone E*."""
        return abs(float(np.linalg.det(self.basis)))

    def diameter(self) -> float:
        """Diameter of the fundamental domain (max over box corner pairs)."""
        best = 0.0
        for signs in product((-1.0, 0.0, 1.0), repeat=self.n):
            d = self.basis @ np.array(signs)
            best = max(best, float(np.linalg.norm(d)))
        return best


def dual_basis(lattice: Lattice) -> DualLattice:
    """Dual lattice of `lattice`, pinned by <e_i, e*_j> = 2*pi*delta_ij."""
    try:
        dual = TWO_PI * np.linalg.inv(lattice.basis.T)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - caught at Lattice
        raise DegenerateLatticeError("cannot invert lattice basis") from exc
    resid = np.abs(lattice.basis.T @ dual - TWO_PI * np.eye(lattice.n)).max()
    if resid > 1e-12 * TWO_PI:
        raise DegenerateLatticeError(
            f"dual basis biorthogonality residual {resid:.3e} (ill-conditioned basis)"
        )
    return DualLattice(dual)


def reduce_to_bz(k, dual: DualLattice) -> np.ndarray:
    """Translate k by a dual-lattice vector into the fundamental domain.

    Works on a single n-vector or an (N, n) batch.  Dual-basis coordinates
    are reduced to [-1/2, 1/2), lower edge included.
    """
    k = np.asarray(k, dtype=float)
    coords = np.linalg.solve(dual.basis, k.T).T if k.ndim > 1 else np.linalg.solve(dual.basis, k)
    coords = coords - np.floor(coords + 0.5)
    return (dual.basis @ coords.T).T if k.ndim > 1 else dual.basis @ coords


@dataclass(frozen=True)
class BZGrid:
    """Uniform product quadrature grid over the Brillouin zone.

    `points` is (N, n); `weights` is (N,) and sums to vol(E*).
    `resolution` records the per-axis subdivision for edge walking.
    """

    points: np.ndarray
    weights: np.ndarray
    resolution: tuple

    def __post_init__(self):
        _frozen_array(self, "points", self.points)
        _frozen_array(self, "weights", self.weights)
        object.__setattr__(self, "resolution", tuple(int(r) for r in self.resolution))
        if self.points.ndim != 2 or self.weights.ndim != 1:
            raise ValidationError("grid points must be (N, n), weights (N,)")
        if self.points.shape[0] != self.weights.shape[0]:
            raise ValidationError("points/weights length mismatch")
        if np.any(self.weights <= 0.0):
            raise ValidationError("grid weights must be positive")

    @property
    def n(self) -> int:
        return self.points.shape[1]


def bz_grid(dual: DualLattice, resolution) -> BZGrid:
    """Uniform (Monkhorst-Pack-style) grid over E* with equal weights.

    `resolution` is a positive integer, applied per axis, or a sequence of
    per-axis integers.  Points are cell centers in dual coordinates, so a
    resolution-1 grid is the single domain-center point.
    """
    n = dual.n
    if np.isscalar(resolution):
        res = (int(resolution),) * n
    else:
        res = tuple(int(r) for r in resolution)
        if len(res) != n:
            raise ValidationError(f"resolution needs {n} axes, got {len(res)}")
    if any(r < 1 for r in res):
        raise ValidationError("resolution must be >= 1 per axis")

    axes = [(np.arange(r) + 0.5) / r - 0.5 for r in res]
    mesh = np.meshgrid(*axes, indexing="ij")
    coords = np.stack([m.ravel() for m in mesh], axis=-1)
    points = coords @ dual.basis.T
    ntot = coords.shape[0]
    weights = np.full(ntot, dual.cell_volume / ntot)
    return BZGrid(points, weights, res)
