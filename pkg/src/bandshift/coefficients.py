"""Leading asymptotic coefficients and their pointwise densities.

The x-integrals are evaluated per angular direction after the substitution
u = w0(theta) r^{-delta} followed by v = u^{1/delta}, which turns the
r^{-delta} stiffness into a bounded, smooth integrand on [0, v_cap]:

    int_0^inf [f(lam + w0 r^{-delta}) - f(lam)] r^{n-1} dr
        = w0^{n/delta} int_0^{v_cap} [f(lam + v^delta) - f(lam)] v^{-n-1} dv
          - f(lam) (w0^{n/delta} / n) u_cap^{-n/delta},

with u_cap the shift beyond which f(lam + u) vanishes; the saturated region
is added in closed form.  The same kernel with f' and weight w1 gives the
first subleading coefficient.

Pointwise densities gamma_0, gamma_1 use the identical substitution with the
smoothed integrated DOS in place of f and finite differences in the energy
argument (step tied to the DOS kernel width), differentiating the integrated
quantity once (gamma_0) or twice (gamma_1).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .bloch import BlochProblem, band_values_on_grid
from .dos import DosTable
from .errors import BandTruncationError, OutOfWindowError, ValidationError
from .lattice import BZGrid, bz_grid
from .perturbation import DecayPotential, ReferenceData


@dataclass(frozen=True)
class TestFunction:
    """Standard compactly supported bump exp(1 - 1/(1-t^2)), t = (lam-c)/w."""

    __test__ = False  # not a pytest class, despite the domain name

    center: float
    half_width: float

    def __post_init__(self):
        if self.half_width <= 0:
            raise ValidationError("half_width must be positive")

    @property
    def support(self) -> tuple:
        return (self.center - self.half_width, self.center + self.half_width)

    def value(self, lam) -> np.ndarray:
        lam = np.asarray(lam, dtype=float)
        t = (lam - self.center) / self.half_width
        out = np.zeros_like(t)
        m = np.abs(t) < 1.0
        out[m] = np.exp(1.0 - 1.0 / (1.0 - t[m] ** 2))
        return out

    def derivative(self, lam) -> np.ndarray:
        lam = np.asarray(lam, dtype=float)
        t = (lam - self.center) / self.half_width
        out = np.zeros_like(t)
        m = np.abs(t) < 1.0
        tm = t[m]
        out[m] = (
            np.exp(1.0 - 1.0 / (1.0 - tm**2))
            * (-2.0 * tm / (1.0 - tm**2) ** 2)
            / self.half_width
        )
        return out

    def grad_norm_sup(self) -> float:
        """Numerical sup of |f'| (dense sampling; the profile is fixed)."""
        t = np.linspace(-1.0, 1.0, 20001)
        return float(np.abs(self.derivative(self.center + self.half_width * t)).max())


@dataclass(frozen=True)
class QuadratureGrids:
    """Resolutions for the coefficient quadratures."""

    bz_resolution: int = 512
    radial_points: int = 128
    angular_points: int = 16

    def bz(self, problem: BlochProblem) -> BZGrid:
        return bz_grid(problem.dual, self.bz_resolution)

    def halved(self) -> "QuadratureGrids":
        return QuadratureGrids(
            max(2, self.bz_resolution // 2),
            max(8, self.radial_points // 2),
            max(4, self.angular_points // 2),
        )


@dataclass(frozen=True)
class CoefficientResult:
    """Computed a_0(f), a_1(f) with self-convergence error estimates."""

    a0: float
    a1: float
    quadrature_error: dict
    metadata: dict = field(default_factory=dict)


def _p_max_for(problem: BlochProblem, grid: BZGrid, cap: float) -> int:
    """First p with min_k lambda_p above cap (the band sum is finite)."""
    p = 2
    while True:
        if p > problem.basis_size:
            raise BandTruncationError("basis too small to bracket the test function support")
        vals = band_values_on_grid(problem, grid.points, min(p, problem.basis_size))
        above = np.nonzero(vals.min(axis=0) > cap)[0]
        if above.size:
            return int(above[0]) + 1
        p *= 2


def _gauss_panels(npts: int):
    """Composite Gauss-Legendre nodes/weights on [0, 1], graded 4-panel split."""
    per = max(4, npts // 4)
    nodes, weights = np.polynomial.legendre.leggauss(per)
    edges = np.array([0.0, 0.1, 0.35, 0.65, 1.0])
    ts, ws = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        ts.append(0.5 * (hi - lo) * (nodes + 1.0) + lo)
        ws.append(0.5 * (hi - lo) * weights)
    return np.concatenate(ts), np.concatenate(ws)


def _direction_weights(potential: DecayPotential, angular_points: int):
    """Quadrature directions and weights on the unit sphere."""
    n = potential.n
    if n == 1:
        return np.array([[-1.0], [1.0]]), np.array([1.0, 1.0])
    if n == 2:
        ang = 2.0 * np.pi * (np.arange(angular_points) + 0.5) / angular_points
        dirs = np.stack([np.cos(ang), np.sin(ang)], axis=-1)
        return dirs, np.full(angular_points, 2.0 * np.pi / angular_points)
    raise ValidationError("coefficient quadrature implemented for n <= 2")


def _radial_integrals(
    f: TestFunction,
    lam: np.ndarray,
    w0: float,
    w1: float,
    delta: float,
    n: int,
    radial_points: int,
    reference: ReferenceData | None,
    theta: np.ndarray,
):
    """Per-direction x-integrals I0(lam), I1(lam) for a batch of energies."""
    t, wt = _gauss_panels(radial_points)
    u_cap = np.maximum(f.support[1] - lam, 0.0)
    v_cap = u_cap ** (1.0 / delta)
    v = v_cap[:, None] * t[None, :]
    shifted = lam[:, None] + v**delta
    f_lam = f.value(lam)

    df = f.value(shifted) - f_lam[:, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        body0 = np.where(v > 0.0, df / np.maximum(v, 1e-300) ** (n + 1), 0.0)
    i0 = w0 ** (n / delta) * (body0 @ wt) * v_cap
    i1 = (
        w1
        * w0 ** ((n - 1.0 - delta) / delta)
        * ((f.derivative(shifted) * v ** (delta - n)) @ wt)
        * v_cap
    )

    live = u_cap > 0.0
    if reference is None:
        tail = np.zeros_like(lam)
        tail[live] = -f_lam[live] * (w0 ** (n / delta) / n) * u_cap[live] ** (-n / delta)
        return i0 + tail, i1

    # chi-sensitive route: direct radial panel across the cutoff support, the
    # saturated strip in closed form, and the same v-integral beyond
    r_ref = reference.chi_support_radius
    rt, rw = _gauss_panels(radial_points)
    r_nodes = r_ref * rt
    pts = r_nodes[:, None] * theta[None, :]
    phi0_vals = np.atleast_1d(reference.phi0(pts))
    if reference.potential.truncation >= 1:
        phi1_vals = np.atleast_1d(reference.phi_j(pts, 1))
    else:
        phi1_vals = np.zeros_like(phi0_vals)
    rad_w = rw * r_ref * r_nodes ** (n - 1)
    inner0 = (f.value(lam[:, None] + phi0_vals[None, :]) - f_lam[:, None]) @ rad_w
    inner1 = (f.derivative(lam[:, None] + phi0_vals[None, :]) * phi1_vals[None, :]) @ rad_w

    r_sat = np.zeros_like(lam)
    r_sat[live] = (w0 / u_cap[live]) ** (1.0 / delta)
    r_sat = np.maximum(r_sat, r_ref)
    strip0 = -f_lam * (r_sat**n - r_ref**n) / n
    return i0 + inner0 + strip0, i1 + inner1


def _assemble_coefficient(
    f: TestFunction,
    problem: BlochProblem,
    potential: DecayPotential,
    grids: QuadratureGrids,
    reference: ReferenceData | None,
):
    grid = grids.bz(problem)
    cap = f.support[1] + 1.0
    p_max = _p_max_for(problem, grid, cap)
    vals = band_values_on_grid(problem, grid.points, p_max)
    lam = vals.ravel()
    weights = np.repeat(grid.weights, p_max)
    if not np.all(np.isfinite(lam)):
        raise ValidationError("non-finite band sample")

    dirs, dir_w = _direction_weights(potential, grids.angular_points)
    total0 = 0.0
    total1 = 0.0
    for theta, dw in zip(dirs, dir_w):
        w0 = float(np.atleast_1d(potential.angular.funcs[0](theta[None, :]))[0])
        w1 = 0.0
        if potential.angular.orders > 1:
            w1 = float(np.atleast_1d(potential.angular.funcs[1](theta[None, :]))[0])
        i0, i1 = _radial_integrals(
            f, lam, w0, w1, potential.delta, potential.n, grids.radial_points, reference, theta
        )
        if not (np.all(np.isfinite(i0)) and np.all(np.isfinite(i1))):
            raise ValidationError("non-finite radial integrand")
        total0 += dw * float(i0 @ weights)
        total1 += dw * float(i1 @ weights)
    norm = 1.0 / (2.0 * np.pi) ** problem.n
    return norm * total0, norm * total1, p_max


def compute_coefficients(
    f: TestFunction,
    problem: BlochProblem,
    potential: DecayPotential,
    grids: QuadratureGrids | None = None,
    reference: ReferenceData | None = None,
) -> CoefficientResult:
    """Both leading coefficients with self-convergence error estimates."""
    if potential.n != problem.n:
        raise ValidationError("potential/problem dimension mismatch")
    grids = grids or QuadratureGrids()
    a0, a1, p_max = _assemble_coefficient(f, problem, potential, grids, reference)
    a0_half, a1_half, _ = _assemble_coefficient(f, problem, potential, grids.halved(), reference)
    return CoefficientResult(
        a0=a0,
        a1=a1,
        quadrature_error={0: abs(a0 - a0_half), 1: abs(a1 - a1_half)},
        metadata={
            "bz_resolution": grids.bz_resolution,
            "radial_points": grids.radial_points,
            "angular_points": grids.angular_points,
            "p_max": p_max,
            "chi_route": reference is not None,
        },
    )


def coefficient_a(
    order: int,
    f: TestFunction,
    problem: BlochProblem,
    potential: DecayPotential,
    grids: QuadratureGrids | None = None,
    reference: ReferenceData | None = None,
) -> CoefficientResult:
    """Asymptotic coefficient of the requested order (0 or 1).

    Both orders share the band data and are returned together in the result;
    `order` selects which one the caller is asking about and is validated.
    """
    if order not in (0, 1):
        raise ValidationError("only orders 0 and 1 have closed quadrature forms")
    return compute_coefficients(f, problem, potential, grids, reference)


@dataclass(frozen=True)
class GammaTable:
    """Pointwise densities gamma_0, gamma_1 on an energy grid."""

    energies: np.ndarray
    gamma0: np.ndarray
    gamma1: np.ndarray


def _shifted_integrals(
    rho_of,
    lam: np.ndarray,
    w0: float,
    w1: float,
    delta: float,
    n: int,
    floor: float,
    kernel_width: float,
    radial_points: int,
):
    """G0(lam) = int [rho(lam) - rho(lam - u(x))] dx and the gamma_1 kernel.

    The smoothed IDS drops to zero across a transition zone of width
    ~kernel_width at the spectrum bottom; that zone gets its own Gauss panel
    so the radial quadrature resolves it.
    """
    t, wt = _gauss_panels(radial_points)
    te, we = np.polynomial.legendre.leggauss(24)
    te = 0.5 * (te + 1.0)
    we = 0.5 * we

    u_split = np.maximum(lam - floor, 0.0)
    v_split = u_split ** (1.0 / delta)
    u_inner = np.maximum(u_split - 3.0 * kernel_width, 0.0)
    v_inner = u_inner ** (1.0 / delta)

    v = np.concatenate(
        [v_inner[:, None] * t[None, :],
         v_inner[:, None] + (v_split - v_inner)[:, None] * te[None, :]],
        axis=1,
    )
    vw = np.concatenate(
        [np.broadcast_to(wt, (lam.size, wt.size)) * v_inner[:, None],
         np.broadcast_to(we, (lam.size, we.size)) * (v_split - v_inner)[:, None]],
        axis=1,
    )
    rho_lam = rho_of(lam)
    shifted = rho_of(lam[:, None] - v**delta)

    diff = rho_lam[:, None] - shifted
    with np.errstate(divide="ignore", invalid="ignore"):
        body0 = np.where(v > 0.0, diff / np.maximum(v, 1e-300) ** (n + 1), 0.0)
    g0 = w0 ** (n / delta) * (body0 * vw).sum(axis=1)
    live = u_split > 0.0
    tail = np.zeros_like(lam)
    tail[live] = rho_lam[live] * (w0 ** (n / delta) / n) * u_split[live] ** (-n / delta)
    g0 = g0 + tail

    g1 = (
        w1
        * w0 ** ((n - 1.0 - delta) / delta)
        * ((shifted * v ** (delta - n)) * vw).sum(axis=1)
    )
    return g0, g1


def gamma_table(
    problem: BlochProblem,
    potential: DecayPotential,
    dos: DosTable,
    lambdas,
    grids: QuadratureGrids | None = None,
    fd_step: float | None = None,
) -> GammaTable:
    """gamma_0 and gamma_1 on `lambdas` by FD of the integrated shifted DOS."""
    grids = grids or QuadratureGrids()
    lambdas = np.atleast_1d(np.asarray(lambdas, dtype=float))
    h = fd_step if fd_step is not None else dos.kernel_width
    if h <= 0:
        raise ValidationError("fd_step must be positive")
    if lambdas.max() + 2.0 * h > dos.energies[-1] + 1e-12:
        raise ValidationError("DOS table does not cover lambda + 2*fd_step")

    grid = grids.bz(problem)
    floor_band = float(band_values_on_grid(problem, grid.points, 1).min())
    floor = floor_band - dos.kernel_width  # smoothed rho vanishes below this

    dirs, dir_w = _direction_weights(potential, grids.angular_points)

    def g_totals(lam_arr):
        tot0 = np.zeros_like(lam_arr)
        tot1 = np.zeros_like(lam_arr)
        for theta, dw in zip(dirs, dir_w):
            w0 = float(np.atleast_1d(potential.angular.funcs[0](theta[None, :]))[0])
            w1 = 0.0
            if potential.angular.orders > 1:
                w1 = float(np.atleast_1d(potential.angular.funcs[1](theta[None, :]))[0])
            g0, g1 = _shifted_integrals(
                dos.rho_at, lam_arr, w0, w1, potential.delta, potential.n, floor,
                dos.kernel_width, grids.radial_points,
            )
            tot0 += dw * g0
            tot1 += dw * g1
        return tot0, tot1

    offsets = np.array([-2.0, -1.0, 0.0, 1.0, 2.0]) * h
    g0_stencil = np.empty((5, lambdas.size))
    g1_stencil = np.empty((5, lambdas.size))
    for i, off in enumerate(offsets):
        g0_stencil[i], g1_stencil[i] = g_totals(lambdas + off)

    gamma0 = (g0_stencil[0] - 8.0 * g0_stencil[1] + 8.0 * g0_stencil[3] - g0_stencil[4]) / (
        12.0 * h
    )
    gamma1 = (
        -g1_stencil[0]
        + 16.0 * g1_stencil[1]
        - 30.0 * g1_stencil[2]
        + 16.0 * g1_stencil[3]
        - g1_stencil[4]
    ) / (12.0 * h**2)
    return GammaTable(lambdas, gamma0, gamma1)


def gamma(
    order: int,
    lam: float,
    problem: BlochProblem,
    potential: DecayPotential,
    dos: DosTable,
    grids: QuadratureGrids | None = None,
    fd_step: float | None = None,
    window: tuple | None = None,
) -> float:
    """Pointwise density gamma_order(lam); lam must lie in `window` if given."""
    if order not in (0, 1):
        raise ValidationError("only gamma_0 and gamma_1 are implemented")
    if window is not None and not (window[0] <= lam <= window[1]):
        raise OutOfWindowError(f"lambda={lam} outside window {window}")
    table = gamma_table(problem, potential, dos, [lam], grids, fd_step)
    return float(table.gamma0[0] if order == 0 else table.gamma1[0])


@dataclass(frozen=True)
class DualityReport:
    """Residuals of a_j(f) = -<gamma_j, f> for j = 0, 1."""

    residual0: float
    residual1: float
    a0: float
    a1: float
    integral0: float
    integral1: float


def duality_check(
    f: TestFunction,
    window: tuple,
    problem: BlochProblem,
    potential: DecayPotential,
    dos: DosTable,
    grids: QuadratureGrids | None = None,
    n_lambda: int = 129,
    fd_step: float | None = None,
) -> DualityReport:
    """Compare the a_j quadratures against -integral gamma_j(lam) f(lam) dlam."""
    lo, hi = window
    if not (lo <= f.support[0] and f.support[1] <= hi):
        raise ValidationError("test function support must lie inside the window")
    result = compute_coefficients(f, problem, potential, grids)
    lam = np.linspace(f.support[0], f.support[1], n_lambda)
    table = gamma_table(problem, potential, dos, lam, grids, fd_step)
    fvals = f.value(lam)
    integral0 = float(np.trapezoid(table.gamma0 * fvals, lam))
    integral1 = float(np.trapezoid(table.gamma1 * fvals, lam))
    return DualityReport(
        residual0=abs(result.a0 + integral0),
        residual1=abs(result.a1 + integral1),
        a0=result.a0,
        a1=result.a1,
        integral0=integral0,
        integral1=integral1,
    )
