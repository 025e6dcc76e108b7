"""Decaying perturbations and the semiclassical reference construction.

The built-in potential family is an exact finite angular sum
sum_j w_j(x/|x|) |x|^{-delta-j} outside |x| = 1, blended over [0.8, 1] to a
smooth positive core.  The blend uses an exp(-1/t^2)-type smoothstep: its
Fourier content decays fast enough that plane-wave discretizations of mu*W
stay accurate at large coupling.

`build_reference` realizes the cutoff chi, plateau constant M, the mollified
shift Theta, the scaled profile phi(x, h), its expansion coefficients phi_j,
and the compactly supported residual Wtilde, together with the numerically
checked ball inclusions that bound the strong-coupling core.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import HTooLargeError, ValidationError

_BLEND_LO = 0.8
_BLEND_HI = 1.0


def _bump(t: np.ndarray, order: int) -> np.ndarray:
    out = np.zeros_like(t)
    m = t > 0
    with np.errstate(divide="ignore", over="ignore"):
        out[m] = np.exp(-1.0 / np.maximum(t[m], 1e-300) ** order)
    return out


def smoothstep(s, order: int = 2) -> np.ndarray:
    """C-infinity monotone step: 0 for s <= 0, 1 for s >= 1."""
    s = np.asarray(s, dtype=float)
    scalar = s.ndim == 0
    s = np.atleast_1d(s)
    out = np.where(s >= 1.0, 1.0, 0.0)
    mid = (s > 0.0) & (s < 1.0)
    g1 = _bump(s[mid], order)
    out[mid] = g1 / (g1 + _bump(1.0 - s[mid], order))
    return float(out[0]) if scalar else out


@dataclass(frozen=True)
class AngularCoefficients:
    """Angular expansion coefficients w_0, w_1, ... on the unit sphere.

    Each entry is a callable taking unit vectors of shape (n,) or (N, n).
    For n = 1 the sphere is the two-point set {-1, +1}.
    """

    n: int
    funcs: tuple

    def __post_init__(self):
        object.__setattr__(self, "funcs", tuple(self.funcs))
        if not self.funcs:
            raise ValidationError("need at least the leading coefficient w0")
        w0 = self.sample_values(0)
        if np.any(w0 <= 0.0):
            raise ValidationError("w0 must be strictly positive on the sphere")

    @classmethod
    def from_constants(cls, n: int, values) -> "AngularCoefficients":
        funcs = []
        for v in values:
            v = float(v)
            funcs.append(lambda theta, v=v: np.full(np.atleast_2d(theta).shape[0], v))
        return cls(n, tuple(funcs))

    @classmethod
    def from_pairs(cls, pairs) -> "AngularCoefficients":
        """1D coefficients given as (w_j(-1), w_j(+1)) pairs."""
        funcs = []
        for lo, hi in pairs:
            lo, hi = float(lo), float(hi)

            def f(theta, lo=lo, hi=hi):
                th = np.atleast_2d(theta)
                return np.where(th[:, 0] < 0.0, lo, hi)

            funcs.append(f)
        return cls(1, tuple(funcs))

    @property
    def orders(self) -> int:
        return len(self.funcs)

    def directions(self, count: int = 64) -> np.ndarray:
        """Sample directions on S^{n-1}: both poles for n=1, uniform circle for n=2."""
        if self.n == 1:
            return np.array([[-1.0], [1.0]])
        if self.n == 2:
            ang = 2.0 * np.pi * (np.arange(count) + 0.5) / count
            return np.stack([np.cos(ang), np.sin(ang)], axis=-1)
        raise ValidationError("only n <= 2 sphere sampling is implemented")

    def sample_values(self, j: int, count: int = 64) -> np.ndarray:
        return np.asarray(self.funcs[j](self.directions(count)), dtype=float)

    def w0_range(self) -> tuple:
        w0 = self.sample_values(0)
        return float(w0.min()), float(w0.max())


@dataclass(frozen=True)
class DecayPotential:
    """Strictly positive W with prescribed power-law angular expansion.

    Outside |x| = 1 the potential equals the angular sum exactly (the
    remainder beyond the stored orders is identically zero); inside, it is
    blended to `core`, a smooth positive cap.
    """

    delta: float
    angular: AngularCoefficients
    core: object = None  # callable (N, n) -> (N,); default: constant w0 average
    core_scale: float = 1.0

    def __post_init__(self):
        if self.delta <= self.angular.n:
            raise ValidationError(
                f"decay exponent delta={self.delta} must exceed the dimension n={self.angular.n}"
            )
        if self.core is None:
            level = self.core_scale * float(self.angular.sample_values(0).mean())
            if level <= 0:
                raise ValidationError("core level must be positive")
            object.__setattr__(
                self, "core", lambda x, level=level: np.full(np.atleast_2d(x).shape[0], level)
            )
        w = self.evaluate(self._positivity_samples())
        if np.any(w <= 0.0):
            raise ValidationError("W must be strictly positive (sampled check failed)")

    @property
    def n(self) -> int:
        return self.angular.n

    @property
    def truncation(self) -> int:
        return self.angular.orders - 1

    def _positivity_samples(self) -> np.ndarray:
        radii = np.concatenate([np.linspace(1e-3, 2.0, 41), np.geomspace(2.0, 50.0, 20)])
        dirs = self.angular.directions()
        return (radii[:, None, None] * dirs[None, :, :]).reshape(-1, self.n)

    def angular_sum(self, theta: np.ndarray, r: np.ndarray) -> np.ndarray:
        """Exact tail sum_j w_j(theta) r^{-delta-j} (valid for r > 0)."""
        r = np.asarray(r, dtype=float)
        total = np.zeros_like(r)
        for j, f in enumerate(self.angular.funcs):
            total += np.asarray(f(theta), dtype=float) * r ** (-(self.delta + j))
        return total

    def evaluate(self, x) -> np.ndarray | float:
        """W(x) for a single n-vector or an (N, n) batch."""
        x = np.asarray(x, dtype=float)
        scalar = x.ndim == 1
        pts = np.atleast_2d(x)
        r = np.linalg.norm(pts, axis=1)
        out = np.empty_like(r)
        core_vals = np.asarray(self.core(pts), dtype=float)

        inner = r <= _BLEND_LO
        out[inner] = core_vals[inner]
        rest = ~inner
        if np.any(rest):
            theta = pts[rest] / r[rest, None]
            s_vals = self.angular_sum(theta, r[rest])
            eta = 1.0 - smoothstep((r[rest] - _BLEND_LO) / (_BLEND_HI - _BLEND_LO), order=2)
            out[rest] = eta * core_vals[rest] + (1.0 - eta) * s_vals
        return float(out[0]) if scalar else out

    def fingerprint(self) -> tuple:
        w_samples = tuple(
            tuple(np.round(self.angular.sample_values(j), 15)) for j in range(self.angular.orders)
        )
        return (self.delta, self.angular.n, w_samples, self.core_scale)


def eval_W(potential: DecayPotential, x):
    """Module-level evaluation hook for the perturbation."""
    return potential.evaluate(x)


def choose_M(window, potential: DecayPotential, v_sup: float) -> float:
    """Plateau constant for the reference construction over `window` = (a, b)."""
    a, b = window
    if not a < b:
        raise ValidationError("window requires a < b")
    base = abs(a) + abs(b)
    return max(base, 4.0 * (base + v_sup)) + 1.0


@dataclass(frozen=True)
class ChiProfile:
    """Smooth cutoff supported in B(0, radius), identically 1 on half the radius."""

    radius: float
    order: int = 2

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        pts = np.atleast_2d(x)
        s = np.linalg.norm(pts, axis=1) / self.radius
        vals = 1.0 - smoothstep(2.0 * s - 1.0, order=self.order)
        return float(vals[0]) if x.ndim == 1 else vals

    def describe(self) -> dict:
        return {"kind": "mollified plateau", "radius": self.radius, "order": self.order}


@dataclass(frozen=True)
class Theta:
    """Mollified identity: Theta(t) = t for t >= M/2, range [M/3, inf)."""

    M: float
    order: int = 1

    def __call__(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        scalar = t.ndim == 0
        t = np.atleast_1d(t)
        u = (t - self.M / 3.0) / (self.M / 6.0)
        sigma = np.where(u >= 1.0, u, u * smoothstep(u, order=self.order))
        sigma = np.where(u <= 0.0, 0.0, sigma)
        out = np.where(t >= self.M / 2.0, t, self.M / 3.0 + (self.M / 6.0) * sigma)
        return float(out[0]) if scalar else out

    def residual(self, t) -> np.ndarray:
        """Phi(t) = t - Theta(t); vanishes for t >= M/2."""
        return np.asarray(t, dtype=float) - self(t)

    def describe(self) -> dict:
        return {"kind": "mollified identity", "M": self.M, "order": self.order}


@dataclass(frozen=True)
class ReferenceData:
    """Semiclassical reference data: chi, M, Theta, phi profiles, Wtilde."""

    potential: DecayPotential
    M: float
    r1: float
    r2: float
    chi: ChiProfile
    theta: Theta
    h: float

    @property
    def chi_support_radius(self) -> float:
        return self.chi.radius

    def phi0(self, x) -> np.ndarray | float:
        """Leading profile (1 - chi) w0 |x|^{-delta} + M chi."""
        return self._phi_j(x, 0, include_plateau=True)

    def phi_j(self, x, j: int) -> np.ndarray | float:
        """Subleading profiles (1 - chi) w_j |x|^{-delta-j}, j >= 1."""
        if j < 1:
            raise ValidationError("phi_j is defined for j >= 1; use phi0")
        return self._phi_j(x, j, include_plateau=False)

    def _phi_j(self, x, j: int, include_plateau: bool):
        x = np.asarray(x, dtype=float)
        scalar = x.ndim == 1
        pts = np.atleast_2d(x)
        r = np.linalg.norm(pts, axis=1)
        chi_vals = np.atleast_1d(self.chi(pts))
        out = np.zeros_like(r)
        live = chi_vals < 1.0
        if np.any(live):
            theta = pts[live] / np.maximum(r[live, None], 1e-300)
            wj = np.asarray(self.potential.angular.funcs[j](theta), dtype=float)
            out[live] = (1.0 - chi_vals[live]) * wj * r[live] ** (-(self.potential.delta + j))
        if include_plateau:
            out += self.M * chi_vals
        return float(out[0]) if scalar else out

    def phi(self, x, h: float | None = None) -> np.ndarray | float:
        """Scaled profile phi(x, h) = (1 - chi(x)) h^{-delta} W(x/h) + M chi(x)."""
        h = self.h if h is None else h
        x = np.asarray(x, dtype=float)
        scalar = x.ndim == 1
        pts = np.atleast_2d(x)
        chi_vals = np.atleast_1d(self.chi(pts))
        out = self.M * chi_vals
        live = chi_vals < 1.0
        if np.any(live):
            w = np.asarray(self.potential.evaluate(pts[live] / h), dtype=float)
            out[live] += (1.0 - chi_vals[live]) * h ** (-self.potential.delta) * w
        return float(out[0]) if scalar else out

    def w_tilde(self, x, h: float | None = None) -> np.ndarray | float:
        """Residual Wtilde(x) = chi(h x) (h^{-delta} W(x) - M), compactly supported."""
        h = self.h if h is None else h
        x = np.asarray(x, dtype=float)
        scalar = x.ndim == 1
        pts = np.atleast_2d(x)
        chi_vals = np.atleast_1d(self.chi(h * pts))
        out = np.zeros_like(chi_vals)
        live = chi_vals > 0.0
        if np.any(live):
            w = np.asarray(self.potential.evaluate(pts[live]), dtype=float)
            out[live] = chi_vals[live] * (h ** (-self.potential.delta) * w - self.M)
        return float(out[0]) if scalar else out

    def phi_expansion(self, x, h: float | None = None, orders: int | None = None):
        """Partial sum sum_{j<=orders} phi_j(x) h^j."""
        h = self.h if h is None else h
        if orders is None:
            orders = self.potential.truncation
        total = np.asarray(self.phi0(x), dtype=float)
        for j in range(1, orders + 1):
            total = total + np.asarray(self.phi_j(x, j), dtype=float) * h**j
        return total

    def describe(self) -> dict:
        return {
            "M": self.M,
            "r1": self.r1,
            "r2": self.r2,
            "h": self.h,
            "chi": self.chi.describe(),
            "theta": self.theta.describe(),
        }


def build_reference(
    potential: DecayPotential,
    M: float,
    h: float,
    r1: float | None = None,
    r2: float | None = None,
    chi_order: int = 2,
    theta_order: int = 1,
) -> ReferenceData:
    """Construct the reference data at semiclassical parameter h = mu^{-1/delta}.

    Raises HTooLargeError when the sampled ball inclusions
    B(0, r1 M^{-1/delta} / h) subset {h^{-delta} W > M} subset B(0, r2 M^{-1/delta} / h)
    fail, which bounds the admissible h for the given potential and M.
    """
    if M <= 0 or h <= 0:
        raise ValidationError("M and h must be positive")
    delta = potential.delta
    w0_lo, w0_hi = potential.angular.w0_range()
    if r1 is None:
        r1 = 0.9 * w0_lo ** (1.0 / delta)
    if r2 is None:
        r2 = 1.1 * w0_hi ** (1.0 / delta)
    if not (0.0 < r1 < w0_lo ** (1.0 / delta) <= w0_hi ** (1.0 / delta) < r2):
        raise ValidationError(
            "need 0 < r1 < (min w0)^{1/delta} <= (max w0)^{1/delta} < r2"
        )

    r_in = r1 * M ** (-1.0 / delta) / h
    r_out = r2 * M ** (-1.0 / delta) / h
    dirs = potential.angular.directions()
    scaled = M * h**delta
    inner_r = np.linspace(1e-6, r_in * (1.0 - 1e-9), 64)
    for d in dirs:
        w = potential.evaluate(inner_r[:, None] * d[None, :])
        if np.any(w <= scaled):
            raise HTooLargeError(
                f"inner ball inclusion fails at h={h:.3g} (try smaller h or larger M)"
            )
    outer_r = np.geomspace(r_out * (1.0 + 1e-9), 10.0 * r_out + 10.0, 64)
    for d in dirs:
        w = potential.evaluate(outer_r[:, None] * d[None, :])
        if np.any(w > scaled):
            raise HTooLargeError(
                f"outer ball inclusion fails at h={h:.3g} (try smaller h or larger M)"
            )

    chi = ChiProfile(radius=r1 * M ** (-1.0 / delta), order=chi_order)
    theta = Theta(M=M, order=theta_order)
    return ReferenceData(potential, M, r1, r2, chi, theta, h)


@dataclass(frozen=True)
class StructureReport:
    """Sampled residuals for the reference-construction identities.

    `phi0_min_on_chi_support_minus_M` is taken over the open transition
    region 0 < chi < 1, where the plateau/decay average is a strict convex
    combination; on the plateau chi = 1 the profile equals M identically,
    which `phi0_plateau_max_deviation` witnesses.
    """

    euler_max_residual: float
    phi0_decay_max_mismatch: float
    phi0_min_on_chi_support_minus_M: float
    phi0_plateau_max_deviation: float
    phi_outside_max_mismatch: float
    wtilde_outside_max: float


def verify_structure(
    ref: ReferenceData,
    radii=None,
    fd_step: float = 1e-5,
) -> StructureReport:
    """Check the Euler identity and the plateau/decay dichotomy on samples.

    Reports the max residual of x . grad(w0(x/|x|) |x|^{-delta}) =
    -delta w0 |x|^{-delta} on {chi = 0} (finite-difference gradient), the max
    of |phi0 - w0 |x|^{-delta}| on {phi0 < M}, and min phi0 - M on supp chi.
    """
    pot = ref.potential
    delta = pot.delta
    n = pot.n
    dirs = pot.angular.directions()
    if radii is None:
        radii = np.geomspace(max(1.05 * ref.chi_support_radius, 0.05), 5.0, 30)
    pts = (radii[:, None, None] * dirs[None, :, :]).reshape(-1, n)

    def decay_term(x):
        x = np.atleast_2d(x)
        r = np.linalg.norm(x, axis=1)
        theta = x / r[:, None]
        w0 = np.asarray(pot.angular.funcs[0](theta), dtype=float)
        return w0 * r ** (-delta)

    # 5-point central differences, axis by axis
    grad = np.zeros_like(pts)
    for axis in range(n):
        e = np.zeros(n)
        e[axis] = 1.0
        fp1 = decay_term(pts + fd_step * e)
        fm1 = decay_term(pts - fd_step * e)
        fp2 = decay_term(pts + 2.0 * fd_step * e)
        fm2 = decay_term(pts - 2.0 * fd_step * e)
        grad[:, axis] = (-fp2 + 8.0 * fp1 - 8.0 * fm1 + fm2) / (12.0 * fd_step)
    euler = np.abs(np.sum(pts * grad, axis=1) + delta * decay_term(pts))
    euler_max = float(euler.max())

    wide_r = np.concatenate(
        [np.linspace(1e-4, ref.chi_support_radius, 40), np.geomspace(ref.chi_support_radius, 20.0, 40)]
    )
    wide = (wide_r[:, None, None] * dirs[None, :, :]).reshape(-1, n)
    phi0 = np.atleast_1d(ref.phi0(wide))
    below = phi0 < ref.M
    mismatch = 0.0
    if np.any(below):
        mismatch = float(np.abs(phi0[below] - decay_term(wide[below])).max())

    chi_r = np.linspace(1e-4, ref.chi_support_radius * (1.0 - 1e-9), 60)
    chi_pts = (chi_r[:, None, None] * dirs[None, :, :]).reshape(-1, n)
    chi_vals = np.atleast_1d(ref.chi(chi_pts))
    phi0_supp = np.atleast_1d(ref.phi0(chi_pts))
    transition = (chi_vals > 0.0) & (chi_vals < 1.0)
    phi0_margin = float(phi0_supp[transition].min() - ref.M)
    plateau = chi_vals >= 1.0
    plateau_dev = float(np.abs(phi0_supp[plateau] - ref.M).max()) if np.any(plateau) else 0.0

    outside = np.atleast_1d(ref.chi(pts)) == 0.0
    phi_vals = np.atleast_1d(ref.phi(pts))
    direct = ref.h ** (-delta) * np.asarray(pot.evaluate(pts / ref.h), dtype=float)
    phi_mismatch = float(np.abs(phi_vals[outside] - direct[outside]).max())

    far = pts[np.linalg.norm(pts, axis=1) > ref.chi_support_radius / ref.h]
    wtilde_out = 0.0
    if far.size:
        wtilde_out = float(np.abs(np.atleast_1d(ref.w_tilde(far))).max())

    return StructureReport(
        euler_max, mismatch, phi0_margin, plateau_dev, phi_mismatch, wtilde_out
    )
