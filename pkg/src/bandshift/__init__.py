"""Floquet-Bloch bands, density of states, and large-coupling
spectral-shift asymptotics for perturbed periodic Schroedinger operators."""

from .bloch import BandSet, BlochProblem, FourierPotential, assemble_pk, band_gradient, \
    band_laplacian, band_values_on_grid, solve_bands
from .coefficients import CoefficientResult, DualityReport, GammaTable, QuadratureGrids, \
    TestFunction, coefficient_a, compute_coefficients, duality_check, gamma, gamma_table
from .config import RunConfig
from .dos import DosTable, FermiSurfaceSample, WindowCertificate, certify_window, \
    dos_density, fermi_surface, ids
from .lattice import BZGrid, DualLattice, Lattice, bz_grid, dual_basis, reduce_to_bz
from .oracle import BoxDiscretization, MuSweepFit, QReductionReport, TraceEstimate, \
    box_for_mu, box_spectrum, mu_sweep_fit, q_reduction_check, smoothed_xi_prime, \
    trace_f_diff
from .perturbation import AngularCoefficients, ChiProfile, DecayPotential, ReferenceData, \
    StructureReport, Theta, build_reference, choose_M, eval_W, verify_structure

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
