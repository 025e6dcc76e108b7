"""Command-line pipeline: bands, dos, certify, coeffs, verify, sweep.

Exit codes: 0 ok, 2 validation failure, 3 certificate rejection,
4 tolerance breach in `verify`, 5 numerical failure.  Outputs are
deterministic for a fixed configuration: fixed summation orders, fixed
float formatting, and no timestamps in the metadata block.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_CERTIFICATE = 3
EXIT_TOLERANCE = 4
EXIT_NUMERICAL = 5

_VERIFY_EULER_TOL = 1e-8
_VERIFY_PHI0_TOL = 1e-12
_VERIFY_DUALITY_REL = 1e-4


def _fmt(x) -> str:
    if isinstance(x, str):
        return x
    return f"{float(x):.17g}"


def _write_csv(path: Path, header, rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _write_json(path: Path, payload) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _metadata(cfg, extra=None) -> dict:
    meta = {"config": cfg.resolved()}
    if extra:
        meta.update(extra)
    return meta


def _cmd_bands(cfg, outdir: Path, fmt: str) -> int:
    from .bloch import band_values_on_grid
    from .lattice import bz_grid

    problem = cfg.build_problem()
    grid = bz_grid(problem.dual, cfg.bz_resolution)
    vals = band_values_on_grid(problem, grid.points, cfg.bloch_p_max)
    header = [f"k{i + 1}" for i in range(problem.n)] + [
        f"lambda{p}" for p in range(1, cfg.bloch_p_max + 1)
    ]
    rows = [list(k) + list(v) for k, v in zip(grid.points, vals)]
    _write_csv(outdir / "bands.csv", header, rows)
    if fmt == "json":
        _write_json(
            outdir / "bands.json",
            {"k": [list(map(float, k)) for k in grid.points], "bands": vals.tolist()},
        )
    _write_json(outdir / "metadata.json", _metadata(cfg, {"artifact": "bands"}))
    return EXIT_OK


def _cmd_dos(cfg, outdir: Path, fmt: str) -> int:
    import numpy as np

    from .dos import dos_density
    from .lattice import bz_grid

    problem = cfg.build_problem()
    grid = bz_grid(problem.dual, cfg.bz_resolution)
    if cfg.dos_energy_min is None or cfg.dos_energy_max is None:
        raise_validation("dos.energy_min and dos.energy_max are required")
    energies = np.linspace(cfg.dos_energy_min, cfg.dos_energy_max, cfg.dos_points)
    width = cfg.dos_kernel_width
    if width is None:
        width = 4.0 * (energies[1] - energies[0])
    table = dos_density(problem, energies, grid, width)
    _write_csv(
        outdir / "dos.csv",
        ["energy", "rho", "rho_prime"],
        zip(table.energies, table.rho, table.rho_prime),
    )
    if fmt == "json":
        _write_json(
            outdir / "dos.json",
            {
                "energy": table.energies.tolist(),
                "rho": table.rho.tolist(),
                "rho_prime": table.rho_prime.tolist(),
            },
        )
    _write_json(
        outdir / "metadata.json",
        _metadata(cfg, {"artifact": "dos", "kernel_width": width}),
    )
    return EXIT_OK


def raise_validation(msg: str):
    from .errors import ValidationError

    raise ValidationError(msg)


def _certificate_payload(cert) -> dict:
    return {
        "a": cert.a,
        "b": cert.b,
        "min_gradient_norm": cert.min_gradient_norm,
        "min_laplacian": cert.min_laplacian,
        "non_trapping_c0": cert.non_trapping_c0,
        "status": cert.status,
        "reason": cert.reason,
    }


def _cmd_certify(cfg, outdir: Path, fmt: str) -> int:
    from .dos import certify_window
    from .lattice import bz_grid

    problem = cfg.build_problem()
    potential = cfg.build_decay_potential()
    grid = bz_grid(problem.dual, cfg.bz_resolution)
    a, b = cfg.window()
    w0_min = float(potential.angular.sample_values(0).min())
    cert = certify_window(problem, a, b, grid, potential.delta, w0_min,
                          lap_step=cfg.bloch_fd_step)
    _write_json(outdir / "certificate.json", _certificate_payload(cert))
    _write_json(outdir / "metadata.json", _metadata(cfg, {"artifact": "certify"}))
    if cert.status != "certified":
        print(f"window rejected: {cert.reason}", file=sys.stderr)
        return EXIT_CERTIFICATE
    return EXIT_OK


def _cmd_coeffs(cfg, outdir: Path, fmt: str) -> int:
    import numpy as np

    from .coefficients import compute_coefficients, gamma_table
    from .dos import dos_density
    from .lattice import bz_grid

    problem = cfg.build_problem()
    potential = cfg.build_decay_potential()
    f = cfg.build_test_function()
    grids = cfg.build_quadrature_grids()
    result = compute_coefficients(f, problem, potential, grids)

    payload = {
        "a0": result.a0,
        "a1": result.a1,
        "quadrature_error": {str(k): v for k, v in result.quadrature_error.items()},
        "metadata": result.metadata,
    }
    if cfg.window_a is not None and cfg.window_b is not None:
        grid = bz_grid(problem.dual, cfg.bz_resolution)
        lo, hi = cfg.window()
        width = cfg.dos_kernel_width or 4.0 * (hi - lo) / max(cfg.dos_points, 2)
        emin = cfg.dos_energy_min
        emax = cfg.dos_energy_max
        if emin is None or emax is None:
            raise_validation("gamma table needs dos.energy_min/max in the config")
        energies = np.linspace(emin, emax, cfg.dos_points)
        table = dos_density(problem, energies, grid, width)
        lam = np.linspace(lo, hi, 65)
        gtab = gamma_table(problem, potential, table, lam, grids, cfg.gamma_fd_step)
        _write_csv(
            outdir / "gamma.csv",
            ["lambda", "gamma0", "gamma1"],
            zip(gtab.energies, gtab.gamma0, gtab.gamma1),
        )
    _write_json(outdir / "coeffs.json", payload)
    _write_json(outdir / "metadata.json", _metadata(cfg, {"artifact": "coeffs"}))
    return EXIT_OK


def _cmd_verify(cfg, outdir: Path, fmt: str) -> int:
    import numpy as np

    from .coefficients import duality_check
    from .dos import certify_window, dos_density
    from .lattice import bz_grid
    from .perturbation import build_reference, choose_M, verify_structure

    problem = cfg.build_problem()
    potential = cfg.build_decay_potential()
    a, b = cfg.window()
    v_sup = problem.potential.sup_bound()
    M = choose_M((a, b), potential, v_sup)
    h0 = 0.05 * M ** (-1.0 / potential.delta)
    ref = build_reference(potential, M, h0, cfg.ref_r1, cfg.ref_r2)
    report = verify_structure(ref)

    grid = bz_grid(problem.dual, cfg.bz_resolution)
    w0_min = float(potential.angular.sample_values(0).min())
    cert = certify_window(problem, a, b, grid, potential.delta, w0_min,
                          lap_step=cfg.bloch_fd_step)

    payload = {
        "structure": {
            "euler_max_residual": report.euler_max_residual,
            "phi0_decay_max_mismatch": report.phi0_decay_max_mismatch,
            "phi0_min_on_chi_support_minus_M": report.phi0_min_on_chi_support_minus_M,
            "phi_outside_max_mismatch": report.phi_outside_max_mismatch,
            "wtilde_outside_max": report.wtilde_outside_max,
            "M": M,
            "h": h0,
        },
        "certificate": _certificate_payload(cert),
    }

    breaches = []
    if report.euler_max_residual > _VERIFY_EULER_TOL:
        breaches.append("euler identity residual")
    if report.phi0_decay_max_mismatch > _VERIFY_PHI0_TOL:
        breaches.append("phi0 decay mismatch")
    if report.phi0_min_on_chi_support_minus_M <= 0.0:
        breaches.append("phi0 plateau margin")

    if cfg.f_center is not None and cfg.f_half_width is not None:
        f = cfg.build_test_function()
        emin = cfg.dos_energy_min
        emax = cfg.dos_energy_max
        if emin is not None and emax is not None:
            energies = np.linspace(emin, emax, cfg.dos_points)
            width = cfg.dos_kernel_width or 4.0 * (energies[1] - energies[0])
            table = dos_density(problem, energies, grid, width)
            grids = cfg.build_quadrature_grids()
            rep = duality_check(f, (a, b), problem, potential, table, grids,
                                fd_step=cfg.gamma_fd_step)
            payload["duality"] = {
                "residual0": rep.residual0,
                "residual1": rep.residual1,
                "a0": rep.a0,
                "a1": rep.a1,
            }
            if rep.residual0 > _VERIFY_DUALITY_REL * max(abs(rep.a0), 1e-300):
                breaches.append("duality residual")

    payload["tolerance_breaches"] = breaches
    _write_json(outdir / "verify.json", payload)
    _write_json(outdir / "metadata.json", _metadata(cfg, {"artifact": "verify",
                                                          "reference": ref.describe()}))
    if cert.status != "certified":
        print(f"window rejected: {cert.reason}", file=sys.stderr)
        return EXIT_CERTIFICATE
    if breaches:
        print("tolerance breaches: " + ", ".join(breaches), file=sys.stderr)
        return EXIT_TOLERANCE
    return EXIT_OK


def _cmd_sweep(cfg, outdir: Path, fmt: str) -> int:
    from .coefficients import compute_coefficients
    from .oracle import box_for_mu, mu_sweep_fit, trace_f_diff

    problem = cfg.build_problem()
    potential = cfg.build_decay_potential()
    f = cfg.build_test_function()
    if not cfg.oracle_mu_list:
        raise_validation("oracle.mu_list is required for sweep")
    mus = [float(m) for m in cfg.oracle_mu_list]
    coeffs = compute_coefficients(f, problem, potential, cfg.build_quadrature_grids())

    boxes = {}
    for mu in mus:
        if cfg.oracle_cells is not None:
            from .oracle import BoxDiscretization

            boxes[mu] = BoxDiscretization(
                problem, cfg.oracle_cells, cfg.oracle_modes_per_cell, cfg.oracle_c_tail,
                cfg.oracle_dense_threshold, cfg.oracle_cheb_degree_factor,
            )
        else:
            boxes[mu] = box_for_mu(
                problem, mu, potential.delta, cfg.oracle_c_tail,
                cfg.oracle_modes_per_cell, cfg.oracle_dense_threshold,
                cfg.oracle_cheb_degree_factor,
            )
    fit = mu_sweep_fit(boxes, f, mus, potential, a0_scale=coeffs.a0)

    rows = []
    for mu in fit.mus:
        est = trace_f_diff(boxes[mu], f, mu, potential, a0_scale=coeffs.a0)
        rows.append((mu, est.value, est.method, est.error_estimate))
    _write_csv(outdir / "sweep.csv", ["mu", "trace", "method", "error_estimate"], rows)
    _write_json(
        outdir / "sweep.json",
        {
            "mus": list(fit.mus),
            "traces": list(fit.traces),
            "c0": fit.c0,
            "c1": fit.c1,
            "a0": coeffs.a0,
            "a1": coeffs.a1,
            "residual_two_term": fit.residual_two_term,
            "residual_one_term": fit.residual_one_term,
            "loglog_slope": fit.loglog_slope,
        },
    )
    _write_json(outdir / "metadata.json", _metadata(cfg, {"artifact": "sweep"}))
    return EXIT_OK


_COMMANDS = {
    "bands": _cmd_bands,
    "dos": _cmd_dos,
    "certify": _cmd_certify,
    "coeffs": _cmd_coeffs,
    "verify": _cmd_verify,
    "sweep": _cmd_sweep,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="bandshift",
        description="Floquet-Bloch bands, DOS, and large-coupling spectral-shift asymptotics",
    )
    parser.add_argument("command", choices=sorted(_COMMANDS))
    parser.add_argument("--config", required=True, help="path to key=value config file")
    parser.add_argument("--out", default=".", help="output directory")
    parser.add_argument("--format", choices=["csv", "json"], default="csv")
    parser.add_argument("--threads", type=int, default=None,
                        help="cap BLAS/FFT thread count (set before numpy import)")
    args = parser.parse_args(argv)

    if args.threads is not None:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ.setdefault(var, str(args.threads))

    from .config import RunConfig
    from .errors import NumericalError, ToleranceError, ValidationError

    try:
        cfg = RunConfig.from_file(args.config)
        outdir = Path(args.out)
        outdir.mkdir(parents=True, exist_ok=True)
        return _COMMANDS[args.command](cfg, outdir, args.format)
    except ValidationError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except ToleranceError as exc:
        print(f"tolerance breach: {exc}", file=sys.stderr)
        return EXIT_TOLERANCE
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
