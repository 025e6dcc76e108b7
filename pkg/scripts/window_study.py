#!/usr/bin/env python3
"""Window certification and pointwise-density study for a 1D band structure.

Scans candidate windows inside the first band, prints the certificates
(transversality, convexity, non-trapping constant), and tabulates
gamma_0/gamma_1 on the first certified window.
"""

import argparse

import numpy as np

from bandshift import (
    AngularCoefficients,
    BlochProblem,
    DecayPotential,
    FourierPotential,
    Lattice,
    QuadratureGrids,
    bz_grid,
    certify_window,
    dos_density,
    dual_basis,
    gamma_table,
    solve_bands,
)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--mathieu", action="store_true", help="V = 2 cos y instead of V = 0")
    ap.add_argument("--delta", type=float, default=3.0)
    ap.add_argument("--resolution", type=int, default=256)
    args = ap.parse_args()

    lat = Lattice([[2.0 * np.pi]])
    dual = dual_basis(lat)
    pot_v = FourierPotential.mathieu() if args.mathieu else FourierPotential.free()
    problem = BlochProblem(lat, dual, pot_v, 8.0)
    potential = DecayPotential(args.delta, AngularCoefficients.from_constants(1, [1.0]))

    bottom = solve_bands(problem, [0.0], 1, with_vectors=False).values[0]
    top = solve_bands(problem, [-0.5], 1, with_vectors=False).values[0]
    width = top - bottom
    print(f"first band: [{bottom:.6f}, {top:.6f}], width {width:.3e}")

    grid = bz_grid(dual, args.resolution)
    certified = None
    for lo_frac, hi_frac in ((0.22, 0.40), (0.30, 0.45), (0.15, 0.30), (0.45, 0.60)):
        a = bottom + lo_frac * width
        b = bottom + hi_frac * width
        cert = certify_window(problem, a, b, grid, args.delta, 1.0)
        tag = "CERTIFIED" if cert.status == "certified" else f"rejected ({cert.reason})"
        print(f"window [{a:.6f}, {b:.6f}]: {tag}")
        if cert.status == "certified":
            print(f"  min |grad lam1| = {cert.min_gradient_norm:.4e}   "
                  f"min lap lam1 = {cert.min_laplacian:.4e}   "
                  f"c0 = {cert.non_trapping_c0:.4e}")
            if certified is None:
                certified = cert

    if certified is None:
        print("no certified window found")
        return

    kernel = 0.0625 * (certified.b - certified.a)
    energies = np.linspace(bottom - 3.0 * kernel, certified.b + 6.0 * kernel, 801)
    table = dos_density(problem, energies, bz_grid(dual, 4096), kernel)
    lams = np.linspace(certified.a, certified.b, 9)
    gtab = gamma_table(problem, potential, table, lams, QuadratureGrids(1024, 256))
    print(f"\n{'lambda':>12} {'gamma0':>12} {'gamma1':>12}")
    for lam, g0, g1 in zip(gtab.energies, gtab.gamma0, gtab.gamma1):
        print(f"{lam:12.6f} {g0:12.6f} {g1:12.6f}")


if __name__ == "__main__":
    main()
