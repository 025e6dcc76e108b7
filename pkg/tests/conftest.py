import numpy as np
import pytest

from bandshift import (
    AngularCoefficients,
    BlochProblem,
    DecayPotential,
    FourierPotential,
    Lattice,
    TestFunction,
    dual_basis,
)


@pytest.fixture(scope="session")
def lat_2pi():
    return Lattice([[2.0 * np.pi]])


@pytest.fixture(scope="session")
def dual_2pi(lat_2pi):
    return dual_basis(lat_2pi)


@pytest.fixture(scope="session")
def free_problem(lat_2pi, dual_2pi):
    return BlochProblem(lat_2pi, dual_2pi, FourierPotential.free(), 8.0)


@pytest.fixture(scope="session")
def mathieu_problem(lat_2pi, dual_2pi):
    return BlochProblem(lat_2pi, dual_2pi, FourierPotential.mathieu(), 12.0)


@pytest.fixture(scope="session")
def decay_w0():
    """w0 = 1, delta = 3, no subleading orders."""
    return DecayPotential(3.0, AngularCoefficients.from_constants(1, [1.0]))


@pytest.fixture(scope="session")
def decay_w0_w1():
    """w0 = 1, w1 = 0.5, delta = 3."""
    return DecayPotential(3.0, AngularCoefficients.from_constants(1, [1.0, 0.5]))


@pytest.fixture(scope="session")
def bump_f():
    return TestFunction(1.0, 0.5)
