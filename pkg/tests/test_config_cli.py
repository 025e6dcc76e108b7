import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from bandshift.cli import main
from bandshift.config import RunConfig
from bandshift.errors import ValidationError

FREE_CFG = """
# free 1D configuration
lattice.dimension = 1
lattice.basis = 6.283185307179586
bz.resolution = 64
bloch.g_max = 8
bloch.p_max = 3
"""

PERT_BLOCK = """
pert.delta = 3.0
pert.w = 1.0 1.0
window.a = 0.04
window.b = 0.16
"""


def test_parse_and_resolve():
    cfg = RunConfig.from_text(FREE_CFG + PERT_BLOCK)
    assert cfg.lattice_dimension == 1
    assert cfg.bz_resolution == 64
    assert cfg.window() == (0.04, 0.16)
    resolved = cfg.resolved()
    assert resolved["bloch.g_max"] == 8.0
    assert resolved["pert.w"] == [[1.0, 1.0]]


def test_unknown_key_rejected():
    with pytest.raises(ValidationError, match="unknown configuration key"):
        RunConfig.from_text("lattice.dimensions = 1")


def test_malformed_line_rejected():
    with pytest.raises(ValidationError):
        RunConfig.from_text("lattice.dimension 1")


def test_fourier_entries():
    cfg = RunConfig.from_text("potential.fourier = 1, 1.0, 0.0; -1, 1.0, 0.0")
    assert cfg.potential_fourier == [((1,), 1.0, 0.0), ((-1,), 1.0, 0.0)]
    prob = cfg.build_problem()
    assert prob.potential.coefficients[(1,)] == 1.0 + 0.0j


def test_delta_at_most_dimension_rejected():
    cfg = RunConfig.from_text("pert.delta = 1.0\npert.w = 1.0 1.0")
    with pytest.raises(ValidationError, match="delta > n"):
        cfg.build_decay_potential()


def test_negative_w0_rejected():
    cfg = RunConfig.from_text("pert.delta = 3.0\npert.w = -1.0 1.0")
    with pytest.raises(ValidationError):
        cfg.build_decay_potential()


def test_lattice_basis_shape_mismatch():
    cfg = RunConfig.from_text("lattice.dimension = 2\nlattice.basis = 1 0 0")
    with pytest.raises(ValidationError):
        cfg.build_lattice()


def _write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


def test_cli_bands_free(tmp_path):
    cfg = _write(tmp_path, "free.cfg", FREE_CFG)
    out = tmp_path / "out"
    assert main(["bands", "--config", str(cfg), "--out", str(out)]) == 0
    lines = (out / "bands.csv").read_text().splitlines()
    assert lines[0] == "k1,lambda1,lambda2,lambda3"
    k, l1, l2, l3 = map(float, lines[1].split(","))
    ms = np.sort((k + np.arange(-8, 9)) ** 2)
    np.testing.assert_allclose([l1, l2, l3], ms[:3], atol=1e-12)
    meta = json.loads((out / "metadata.json").read_text())
    assert meta["config"]["bz.resolution"] == 64


def test_cli_rerun_byte_identical(tmp_path):
    cfg = _write(tmp_path, "free.cfg", FREE_CFG)
    out1, out2 = tmp_path / "o1", tmp_path / "o2"
    assert main(["bands", "--config", str(cfg), "--out", str(out1)]) == 0
    assert main(["bands", "--config", str(cfg), "--out", str(out2)]) == 0
    assert (out1 / "bands.csv").read_bytes() == (out2 / "bands.csv").read_bytes()
    assert (out1 / "metadata.json").read_bytes() == (out2 / "metadata.json").read_bytes()


def test_cli_validation_exit_code(tmp_path):
    cfg = _write(tmp_path, "bad.cfg", "nonsense.key = 1")
    assert main(["bands", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2


def test_cli_certify_ok_and_rejection(tmp_path):
    good = _write(tmp_path, "good.cfg", FREE_CFG + PERT_BLOCK + "bz.resolution = 128\n")
    out = tmp_path / "ok"
    assert main(["certify", "--config", str(good), "--out", str(out)]) == 0
    cert = json.loads((out / "certificate.json").read_text())
    assert cert["status"] == "certified"

    bad = _write(
        tmp_path,
        "bad.cfg",
        FREE_CFG + "pert.delta = 3.0\npert.w = 1.0 1.0\nwindow.a = -0.01\nwindow.b = 0.1\n",
    )
    out2 = tmp_path / "rej"
    assert main(["certify", "--config", str(bad), "--out", str(out2)]) == 3
    cert = json.loads((out2 / "certificate.json").read_text())
    assert "gradient vanishes" in cert["reason"]


def test_cli_dos(tmp_path):
    cfg = _write(
        tmp_path,
        "dos.cfg",
        FREE_CFG + "dos.energy_min = -0.1\ndos.energy_max = 1.0\ndos.points = 201\n",
    )
    out = tmp_path / "out"
    assert main(["dos", "--config", str(cfg), "--out", str(out)]) == 0
    lines = (out / "dos.csv").read_text().splitlines()
    assert lines[0] == "energy,rho,rho_prime"
    assert len(lines) == 202
    rho = np.array([float(l.split(",")[1]) for l in lines[1:]])
    assert np.all(np.diff(rho) >= -1e-15)


def test_cli_coeffs_and_gamma_csv(tmp_path):
    cfg = _write(
        tmp_path,
        "c.cfg",
        FREE_CFG
        + PERT_BLOCK
        + "bz.resolution = 256\nf.center = 0.1\nf.half_width = 0.04\n"
        + "dos.energy_min = -0.05\ndos.energy_max = 0.4\ndos.points = 901\n"
        + "dos.kernel_width = 0.004\n",
    )
    out = tmp_path / "out"
    assert main(["coeffs", "--config", str(cfg), "--out", str(out)]) == 0
    payload = json.loads((out / "coeffs.json").read_text())
    assert payload["a0"] < 0.0
    lines = (out / "gamma.csv").read_text().splitlines()
    assert lines[0] == "lambda,gamma0,gamma1"


def test_cli_verify(tmp_path):
    cfg = _write(
        tmp_path,
        "v.cfg",
        FREE_CFG
        + PERT_BLOCK
        + "bz.resolution = 1024\nf.center = 0.1\nf.half_width = 0.04\n"
        + "dos.energy_min = -0.05\ndos.energy_max = 0.4\ndos.points = 1801\n"
        + "dos.kernel_width = 0.003\ncoeff.radial_points = 256\n",
    )
    out = tmp_path / "out"
    code = main(["verify", "--config", str(cfg), "--out", str(out)])
    payload = json.loads((out / "verify.json").read_text())
    assert payload["structure"]["euler_max_residual"] <= 1e-8
    assert payload["tolerance_breaches"] == []
    assert code == 0


def test_cli_sweep(tmp_path):
    cfg = _write(
        tmp_path,
        "s.cfg",
        FREE_CFG
        + "pert.delta = 3.0\npert.w = 1.0 1.0\n"
        + "f.center = 1.0\nf.half_width = 0.5\n"
        + "bz.resolution = 512\ncoeff.radial_points = 256\n"
        + "oracle.mu_list = 1 10 100\noracle.c_tail = 104\n",
    )
    out = tmp_path / "out"
    assert main(["sweep", "--config", str(cfg), "--out", str(out)]) == 0
    payload = json.loads((out / "sweep.json").read_text())
    assert len(payload["traces"]) == 3
    lines = (out / "sweep.csv").read_text().splitlines()
    assert lines[0] == "mu,trace,method,error_estimate"
    assert "dense" in lines[1]


def test_cli_entry_point_subprocess(tmp_path):
    cfg = _write(tmp_path, "free.cfg", FREE_CFG)
    proc = subprocess.run(
        [sys.executable, "-m", "bandshift.cli", "bands", "--config", str(cfg),
         "--out", str(tmp_path / "o"), "--threads", "1"],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0
