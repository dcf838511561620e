import numpy as np
import pytest

import discountlab as dl


@pytest.fixture(scope="session")
def instance_a():
    """constant-coupling, n=1, N=4, m=2, controls xi in {-1,0,1}, cost -1."""
    return dl.standard_system("constant-coupling")


@pytest.fixture(scope="session")
def instance_a_shifted():
    """Same family with zero cost, so the undiscounted limit is 0."""
    return dl.standard_system("constant-coupling", offset=0.0)


@pytest.fixture(scope="session")
def instance_b():
    """quadratic-plc, n=1, N=8, m=2, 18 controls per mode."""
    return dl.standard_system("quadratic-plc")


@pytest.fixture(scope="session")
def instance_linear_b():
    return dl.standard_system("linear-B")


@pytest.fixture(scope="session")
def eikonal8():
    return dl.standard_system("eikonal-f", N=8)


@pytest.fixture(scope="session")
def eikonal32():
    return dl.standard_system("eikonal-f", N=32)


@pytest.fixture(scope="session")
def eikonal32_normalized(eikonal32):
    shifted, _ = dl.ergodic_normalize(eikonal32, lam=0.01, tol=1e-12)
    return shifted


@pytest.fixture(scope="session")
def instance_b_normalized(instance_b):
    shifted, _ = dl.ergodic_normalize(instance_b, lam=0.05, tol=1e-12)
    return shifted


@pytest.fixture(scope="session")
def tiny_eikonal_normalized():
    """m=1, N=4, 12 weight variables: exhaustive-enumeration territory."""
    sys_ = dl.standard_system("eikonal-f", N=4)
    shifted, _ = dl.ergodic_normalize(sys_, lam=0.01, tol=1e-12)
    return shifted


def solution_of(sys_, lam, tol=1e-11):
    u, _, _ = dl.policy_iterate(sys_, lam, tol=tol)
    return u


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240817)
