"""Integrated density of states, Fermi surfaces, and window certification.

`ids` counts band samples below an energy (sharp indicator, unbiased);
`dos_density` builds a table whose `rho` column is the kernel-smoothed
cumulative and whose `rho_prime` column is its exact derivative, so that
integrating rho_prime over any table interval reproduces the rho increment
by construction.  The kernel is a truncated, renormalized Gaussian supported
on [-kernel_width, kernel_width] (sigma = kernel_width / 4), which keeps rho
exactly zero below the spectrum bottom minus kernel_width.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import erf

from .bloch import BlochProblem, band_gradient, band_laplacian, band_values_on_grid
from .errors import BandTruncationError, DegenerateBandError, ValidationError
from .lattice import BZGrid, reduce_to_bz

_KERNEL_SIGMAS = 4.0  # kernel support half-width, in units of sigma
_EDGE_MARGIN = 1e-3  # certified windows keep this distance from band extrema
_BISECT_K_TOL = 1e-10
_SAMPLE_CHUNK = 2048


def _auto_p_max(problem: BlochProblem, grid: BZGrid, energy: float, start: int = 2) -> int:
    """Smallest p with min_k lambda_p(k) > energy, by doubling the band count."""
    p = max(2, start)
    while True:
        if p > problem.basis_size:
            raise BandTruncationError(
                f"basis too small: no band stays above energy {energy:.6g}"
            )
        vals = band_values_on_grid(problem, grid.points, min(p, problem.basis_size))
        floors = vals.min(axis=0)
        above = np.nonzero(floors > energy)[0]
        if above.size:
            return int(above[0]) + 1
        p *= 2


def ids(problem: BlochProblem, lam: float, grid: BZGrid, p_max: int) -> float:
    """Integrated density of states at energy lam on the given BZ grid."""
    vals = band_values_on_grid(problem, grid.points, p_max)
    if vals[:, p_max - 1].min() <= lam:
        raise BandTruncationError(
            f"p_max={p_max} too small: band {p_max} dips below lambda={lam:.6g}"
        )
    counts = (vals <= lam).sum(axis=1)
    return float(counts @ grid.weights) / (2.0 * np.pi) ** problem.n


@dataclass(frozen=True)
class DosTable:
    """Smoothed integrated DOS and its derivative on an energy grid."""

    energies: np.ndarray
    rho: np.ndarray
    rho_prime: np.ndarray
    kernel_width: float

    def __post_init__(self):
        for name in ("energies", "rho", "rho_prime"):
            arr = np.asarray(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if np.any(np.diff(self.energies) <= 0):
            raise ValidationError("energy grid must be strictly increasing")
        if self.kernel_width <= 0:
            raise ValidationError("kernel_width must be positive")

    def rho_at(self, energy) -> np.ndarray:
        """Interpolated smoothed IDS; zero below table, error above."""
        e = np.asarray(energy, dtype=float)
        if np.any(e > self.energies[-1] + 1e-12):
            raise ValidationError("energy above DOS table coverage")
        return np.interp(e, self.energies, self.rho, left=0.0)


def _kernel_pdf_cdf(diffs: np.ndarray, width: float):
    """Truncated Gaussian kernel (support [-width, width], unit mass)."""
    sigma = width / _KERNEL_SIGMAS
    z = diffs / sigma
    mass = erf(_KERNEL_SIGMAS / np.sqrt(2.0))
    pdf = np.where(
        np.abs(z) < _KERNEL_SIGMAS,
        np.exp(-0.5 * z**2) / (sigma * np.sqrt(2.0 * np.pi) * mass),
        0.0,
    )
    cdf = np.clip((erf(z / np.sqrt(2.0)) + mass) / (2.0 * mass), 0.0, 1.0)
    cdf = np.where(z <= -_KERNEL_SIGMAS, 0.0, np.where(z >= _KERNEL_SIGMAS, 1.0, cdf))
    return pdf, cdf


def dos_density(
    problem: BlochProblem,
    energies,
    grid: BZGrid,
    kernel_width: float,
    p_max: int | None = None,
) -> DosTable:
    """Kernel-smoothed DOS table over `energies` from band samples on `grid`."""
    energies = np.asarray(energies, dtype=float)
    if kernel_width <= 0:
        raise ValidationError("kernel_width must be positive")
    top = energies[-1] + kernel_width
    if p_max is None:
        p_max = _auto_p_max(problem, grid, top)
    vals = band_values_on_grid(problem, grid.points, p_max)
    if vals[:, p_max - 1].min() <= top:
        raise BandTruncationError("p_max too small for requested energy range")

    norm = 1.0 / (2.0 * np.pi) ** problem.n
    samples = vals[:, : p_max - 1].ravel()
    sample_w = np.repeat(grid.weights, p_max - 1) * norm

    rho = np.zeros_like(energies)
    rho_prime = np.zeros_like(energies)
    for start in range(0, samples.size, _SAMPLE_CHUNK):
        lam = samples[start : start + _SAMPLE_CHUNK]
        w = sample_w[start : start + _SAMPLE_CHUNK]
        diffs = energies[:, None] - lam[None, :]
        pdf, cdf = _kernel_pdf_cdf(diffs, kernel_width)
        rho += cdf @ w
        rho_prime += pdf @ w
    return DosTable(energies, rho, rho_prime, kernel_width)


@dataclass(frozen=True)
class FermiSurfaceSample:
    """Grid-refined k-points with lambda_p(k) = lam, as (k, p) pairs."""

    lam: float
    points: tuple  # of (k: np.ndarray, p: int)


def _grid_edges(grid: BZGrid):
    """Pairs of adjacent grid points along each axis, with periodic wrap."""
    res = grid.resolution
    n = len(res)
    pts = grid.points.reshape(res + (n,))
    edges = []
    for axis in range(n):
        rolled = np.roll(pts, -1, axis=axis)
        a = pts.reshape(-1, n)
        b = rolled.reshape(-1, n)
        # wrapped neighbor differs by a dual vector; keep the unreduced copy
        step = pts.take(1, axis=axis) - pts.take(0, axis=axis) if res[axis] > 1 else None
        for i in range(a.shape[0]):
            bb = b[i]
            if step is not None:
                d = bb - a[i]
                expected = step.reshape(-1, n)[0]
                if not np.allclose(d, expected, atol=1e-9):
                    bb = a[i] + expected
            edges.append((a[i], bb))
    return edges


def fermi_surface(
    problem: BlochProblem,
    lam: float,
    grid: BZGrid,
    tol: float,
    p_max: int | None = None,
) -> FermiSurfaceSample:
    """Roots of lambda_p(k) = lam found by bisection along grid edges."""
    if tol <= 0:
        raise ValidationError("tol must be positive")
    if p_max is None:
        p_max = _auto_p_max(problem, grid, lam)
    edges = _grid_edges(grid)
    starts = np.array([e[0] for e in edges])
    ends = np.array([e[1] for e in edges])
    vals_a = band_values_on_grid(problem, starts, p_max)
    vals_b = band_values_on_grid(problem, ends, p_max)

    found = []
    for p in range(1, p_max + 1):
        fa = vals_a[:, p - 1] - lam
        fb = vals_b[:, p - 1] - lam
        hit = np.nonzero(fa * fb <= 0.0)[0]
        hit = [i for i in hit if not (fa[i] == 0.0 and fb[i] == 0.0)]
        if not hit:
            continue
        lo = starts[hit].copy()
        hi = ends[hit].copy()
        flo = fa[hit].copy()
        span = np.linalg.norm(hi - lo, axis=1)
        while np.any(span > _BISECT_K_TOL):
            mid = 0.5 * (lo + hi)
            fm = band_values_on_grid(problem, mid, p)[:, p - 1] - lam
            take_left = flo * fm <= 0.0
            hi = np.where(take_left[:, None], mid, hi)
            lo = np.where(take_left[:, None], lo, mid)
            flo = np.where(take_left, flo, fm)
            span *= 0.5
        roots = 0.5 * (lo + hi)
        res = band_values_on_grid(problem, roots, p)[:, p - 1] - lam
        for k_root, r in zip(roots, res):
            if abs(r) <= tol:
                found.append((reduce_to_bz(k_root, problem.dual), p))

    # dedupe points that collapsed onto the same root from both sides
    unique = []
    for k_root, p in found:
        dup = any(
            p == q and np.linalg.norm(k_root - k2) < 10.0 * _BISECT_K_TOL for k2, q in unique
        )
        if not dup:
            unique.append((k_root, p))
    return FermiSurfaceSample(lam, tuple(unique))


@dataclass(frozen=True)
class WindowCertificate:
    """Numerical certificate for non-criticality and band convexity on [a, b]."""

    a: float
    b: float
    min_gradient_norm: float
    min_laplacian: float
    non_trapping_c0: float
    status: str  # "certified" | "rejected"
    reason: str | None = None

    def __post_init__(self):
        if self.status == "certified":
            ok = (
                self.min_gradient_norm > 0
                and self.min_laplacian > 0
                and self.non_trapping_c0 > 0
            )
            if not ok:
                raise ValidationError("certified windows require positive certificate numbers")


def _rejected(a, b, reason, grad=0.0, lap=0.0, c0=0.0) -> WindowCertificate:
    return WindowCertificate(a, b, grad, lap, c0, "rejected", reason)


def certify_window(
    problem: BlochProblem,
    a: float,
    b: float,
    grid: BZGrid,
    delta: float,
    w0_min: float,
    n_energy_samples: int = 9,
    margin: float = _EDGE_MARGIN,
    lap_step: float | None = None,
) -> WindowCertificate:
    """Certify [a, b] inside the first band: transversality, convexity, non-trapping.

    The shell sample for the non-trapping constant pairs first-band k-points
    (on the window's Fermi surfaces and in the filled region below a) with the
    admissible radial shifts u = w0(theta) r^{-delta}; the bracket is linear
    in u, so each k contributes its endpoint values.
    """
    if not a < b:
        raise ValidationError("window requires a < b")
    if delta <= problem.n:
        raise ValidationError("delta must exceed the dimension")
    if w0_min <= 0:
        raise ValidationError("w0_min must be positive")

    vals = band_values_on_grid(problem, grid.points, 2)
    lam1, lam2 = vals[:, 0], vals[:, 1]
    band_lo, band_hi = float(lam1.min()), float(lam1.max())
    if a <= band_lo + margin or b >= band_hi - margin:
        return _rejected(a, b, "gradient vanishes at band edge")
    near = lam1 <= b + margin
    if float(lam2[near].min()) <= b:
        return _rejected(a, b, "second band intrudes on the window")

    # truncation radius beyond which the shift term is negligible (reported via
    # the u-floor; radii larger than this cannot change the minimum)
    u_floor = 1e-12
    r_trunc = (w0_min / u_floor) ** (1.0 / delta)

    lam_samples = np.linspace(a, b, n_energy_samples)
    fs_points = []
    for lam in lam_samples:
        fs = fermi_surface(problem, float(lam), grid, tol=1e-8, p_max=2)
        pts = [k for k, p in fs.points if p == 1]
        if not pts:
            return _rejected(a, b, f"empty Fermi surface at lambda={lam:.6g}")
        fs_points.extend(pts)

    try:
        grads = np.array([np.linalg.norm(band_gradient(problem, k, 1)) for k in fs_points])
        laps = np.array([band_laplacian(problem, k, 1, step=lap_step) for k in fs_points])
    except DegenerateBandError:
        return _rejected(a, b, "first band degenerate on the Fermi surface")
    min_grad = float(grads.min())
    min_lap = float(laps.min())

    # filled region below the window also meets the energy shell (u >= a - lam1)
    inside = np.nonzero(lam1 < a)[0]
    if inside.size > 32:
        inside = inside[np.linspace(0, inside.size - 1, 32).astype(int)]
    shell_k = list(fs_points) + [grid.points[i] for i in inside]
    shell_lam = [float(band_values_on_grid(problem, k, 1)[0, 0]) for k in shell_k]

    c0 = np.inf
    for k, lamk in zip(shell_k, shell_lam):
        try:
            g2 = float(np.linalg.norm(band_gradient(problem, k, 1)) ** 2)
            lap = band_laplacian(problem, k, 1, step=lap_step)
        except DegenerateBandError:
            return _rejected(a, b, "degenerate band inside the energy shell")
        u_lo = max(a - lamk, u_floor)
        u_hi = b - lamk
        if u_hi <= 0:
            continue
        c0 = min(c0, g2 + delta * u_lo * lap, g2 + delta * u_hi * lap)
    c0 = float(c0)

    if min_grad <= 0 or min_lap <= 0 or c0 <= 0:
        reason = "non-positive certificate quantity"
        if min_lap <= 0:
            reason = "first-band Laplacian not positive on the Fermi surface"
        elif c0 <= 0:
            reason = "non-trapping bracket not positive on the energy shell"
        return _rejected(a, b, reason, min_grad, min_lap, c0)
    return WindowCertificate(a, b, min_grad, min_lap, c0, "certified", None)
