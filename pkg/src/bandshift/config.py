"""Plain-text key=value run configuration.

The file format is one `section.key = value` per line, '#' comments, values
whitespace- or comma-separated; multi-entry values (Fourier coefficients,
angular orders, mu lists) use ';' between entries.  Unknown keys are
rejected.  Every run echoes the fully resolved configuration, including the
chi/Theta profile descriptors, into its metadata block.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .bloch import BlochProblem, FourierPotential
from .coefficients import QuadratureGrids, TestFunction
from .errors import ValidationError
from .lattice import Lattice, dual_basis
from .perturbation import AngularCoefficients, DecayPotential


def _parse_scalar(text: str) -> float:
    try:
        return float(text)
    except ValueError as exc:
        raise ValidationError(f"cannot parse number from {text!r}") from exc


def _parse_numbers(text: str) -> list:
    parts = text.replace(",", " ").split()
    return [_parse_scalar(p) for p in parts]


@dataclass
class RunConfig:
    """Typed view of a configuration file; None means 'not provided'."""

    lattice_dimension: int = 1
    lattice_basis: list = field(default_factory=lambda: [2.0 * np.pi])
    bz_resolution: int = 64
    potential_fourier: list = field(default_factory=list)  # [( (m,...), re, im ), ...]
    bloch_g_max: float = 8.0
    bloch_p_max: int = 4
    bloch_fd_step: float | None = None
    dos_energy_min: float | None = None
    dos_energy_max: float | None = None
    dos_points: int = 512
    dos_kernel_width: float | None = None
    window_a: float | None = None
    window_b: float | None = None
    pert_delta: float | None = None
    pert_w: list = field(default_factory=list)  # per-order lists of numbers
    pert_core_scale: float = 1.0
    ref_r1: float | None = None
    ref_r2: float | None = None
    f_center: float | None = None
    f_half_width: float | None = None
    coeff_radial_points: int = 128
    coeff_angular_points: int = 16
    gamma_fd_step: float | None = None
    oracle_cells: int | None = None
    oracle_modes_per_cell: int = 17
    oracle_c_tail: float = 30.0
    oracle_dense_threshold: int = 4000
    oracle_cheb_degree_factor: float = 8.0
    oracle_mu_list: list = field(default_factory=list)
    seed: int = 0

    _KEYMAP = {
        "lattice.dimension": ("lattice_dimension", "int"),
        "lattice.basis": ("lattice_basis", "floats"),
        "bz.resolution": ("bz_resolution", "int"),
        "potential.fourier": ("potential_fourier", "fourier"),
        "bloch.g_max": ("bloch_g_max", "float"),
        "bloch.p_max": ("bloch_p_max", "int"),
        "bloch.fd_step": ("bloch_fd_step", "float"),
        "dos.energy_min": ("dos_energy_min", "float"),
        "dos.energy_max": ("dos_energy_max", "float"),
        "dos.points": ("dos_points", "int"),
        "dos.kernel_width": ("dos_kernel_width", "float"),
        "window.a": ("window_a", "float"),
        "window.b": ("window_b", "float"),
        "pert.delta": ("pert_delta", "float"),
        "pert.w": ("pert_w", "orders"),
        "pert.core_scale": ("pert_core_scale", "float"),
        "ref.r1": ("ref_r1", "float"),
        "ref.r2": ("ref_r2", "float"),
        "f.center": ("f_center", "float"),
        "f.half_width": ("f_half_width", "float"),
        "coeff.radial_points": ("coeff_radial_points", "int"),
        "coeff.angular_points": ("coeff_angular_points", "int"),
        "gamma.fd_step": ("gamma_fd_step", "float"),
        "oracle.cells": ("oracle_cells", "int"),
        "oracle.modes_per_cell": ("oracle_modes_per_cell", "int"),
        "oracle.c_tail": ("oracle_c_tail", "float"),
        "oracle.dense_threshold": ("oracle_dense_threshold", "int"),
        "oracle.cheb_degree_factor": ("oracle_cheb_degree_factor", "float"),
        "oracle.mu_list": ("oracle_mu_list", "floats"),
        "seed": ("seed", "int"),
    }

    @classmethod
    def from_text(cls, text: str) -> "RunConfig":
        cfg = cls()
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValidationError(f"line {lineno}: expected 'key = value'")
            key, value = (part.strip() for part in line.split("=", 1))
            if key not in cls._KEYMAP:
                raise ValidationError(f"line {lineno}: unknown configuration key {key!r}")
            attr, kind = cls._KEYMAP[key]
            if kind == "int":
                num = _parse_scalar(value)
                if num != int(num):
                    raise ValidationError(f"{key} must be an integer")
                setattr(cfg, attr, int(num))
            elif kind == "float":
                setattr(cfg, attr, _parse_scalar(value))
            elif kind == "floats":
                setattr(cfg, attr, _parse_numbers(value))
            elif kind == "fourier":
                entries = []
                for chunk in value.split(";"):
                    chunk = chunk.strip()
                    if not chunk:
                        continue
                    nums = _parse_numbers(chunk)
                    if len(nums) < 3:
                        raise ValidationError(
                            f"{key}: each entry needs index components plus re, im"
                        )
                    m = tuple(int(x) for x in nums[:-2])
                    entries.append((m, nums[-2], nums[-1]))
                setattr(cfg, attr, entries)
            elif kind == "orders":
                orders = []
                for chunk in value.split(";"):
                    chunk = chunk.strip()
                    if chunk:
                        orders.append(_parse_numbers(chunk))
                setattr(cfg, attr, orders)
        return cfg

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_text(fh.read())

    # -- builders ----------------------------------------------------------

    def build_lattice(self) -> Lattice:
        n = self.lattice_dimension
        if len(self.lattice_basis) != n * n:
            raise ValidationError(
                f"lattice.basis needs {n * n} numbers for dimension {n}"
            )
        rows = np.array(self.lattice_basis, dtype=float).reshape(n, n)
        return Lattice(rows.T)  # rows of the config are generator vectors

    def build_problem(self) -> BlochProblem:
        lattice = self.build_lattice()
        dual = dual_basis(lattice)
        coeffs = {m: complex(re, im) for m, re, im in self.potential_fourier}
        for m in coeffs:
            if len(m) != lattice.n:
                raise ValidationError("potential.fourier index dimension mismatch")
        potential = FourierPotential(coeffs)
        return BlochProblem(lattice, dual, potential, self.bloch_g_max)

    def build_decay_potential(self) -> DecayPotential:
        n = self.lattice_dimension
        if self.pert_delta is None:
            raise ValidationError("pert.delta is required")
        if self.pert_delta <= n:
            raise ValidationError(
                f"pert.delta = {self.pert_delta} rejected: the decay assumption "
                f"requires delta > n = {n}"
            )
        if not self.pert_w:
            raise ValidationError("pert.w is required (at least the leading order)")
        if n == 1:
            pairs = []
            for order in self.pert_w:
                if len(order) == 1:
                    pairs.append((order[0], order[0]))
                elif len(order) == 2:
                    pairs.append((order[0], order[1]))
                else:
                    raise ValidationError("pert.w entries for n=1 are pairs (w(-1), w(+1))")
            angular = AngularCoefficients.from_pairs(pairs)
        else:
            consts = []
            for order in self.pert_w:
                if len(order) != 1:
                    raise ValidationError("pert.w entries for n>=2 are constants")
                consts.append(order[0])
            angular = AngularCoefficients.from_constants(n, consts)
        return DecayPotential(self.pert_delta, angular, core_scale=self.pert_core_scale)

    def build_test_function(self) -> TestFunction:
        if self.f_center is None or self.f_half_width is None:
            raise ValidationError("f.center and f.half_width are required")
        return TestFunction(self.f_center, self.f_half_width)

    def build_quadrature_grids(self) -> QuadratureGrids:
        return QuadratureGrids(
            self.bz_resolution, self.coeff_radial_points, self.coeff_angular_points
        )

    def window(self) -> tuple:
        if self.window_a is None or self.window_b is None:
            raise ValidationError("window.a and window.b are required")
        return (self.window_a, self.window_b)

    def resolved(self) -> dict:
        out = {}
        for key, (attr, _) in self._KEYMAP.items():
            out[key] = getattr(self, attr)
        return out
