import math

import numpy as np
import pytest

from qrate import (DesignParams, PlantModel, bundled_params, bundled_plant,
                   derive_constants, synthesize_design)


@pytest.fixture(scope="session")
def ref_plant():
    return bundled_plant()


@pytest.fixture(scope="session")
def raw_params():
    return bundled_params()


@pytest.fixture(scope="session")
def cert_params(ref_plant, raw_params):
    return synthesize_design(ref_plant, raw_params)


@pytest.fixture(scope="session")
def cert_derived(ref_plant, cert_params):
    return derive_constants(ref_plant, cert_params)


@pytest.fixture(scope="session")
def toy_plant():
    # Scalar plant with per-period open-loop growth exactly 1.1 and
    # closed-loop one-step transition exactly 0.5.
    a = 10.0 * math.log(1.1)
    a_cl = 10.0 * math.log(0.5)
    return PlantModel(
        A=np.array([[a]]),
        B=np.array([[1.0]]),
        D=np.array([[1.0]]),
        K=np.array([[a_cl - a]]),
        dt=0.1,
        n_levels=5,
    )


@pytest.fixture(scope="session")
def toy_params():
    return DesignParams(
        radius0=0.5,
        search_margin=0.2,
        dist_level=0.1,
        psi=0.2,
        rho=1.0,
        phi=0.01,
        Q=np.array([[1.0]]),
    )


@pytest.fixture(scope="session")
def toy_derived(toy_plant, toy_params):
    return derive_constants(toy_plant, toy_params)


def make_random_plant(rng: np.random.Generator) -> PlantModel:
    """Random 2- or 3-state plant guaranteed to pass both assumptions.

    The closed loop is pinned to a diagonally dominant stable target via
    K = B^{-1} (target - A); the open-loop growth over 0.1 s stays far
    below a 5-level grid.
    """
    n = int(rng.integers(2, 4))
    diag = -rng.uniform(1.0, 2.0, n)
    off = rng.uniform(-0.3, 0.3, (n, n)) / max(n - 1, 1)
    target = np.diag(diag) + off * (1.0 - np.eye(n))
    A = rng.uniform(-1.0, 1.0, (n, n))
    B = 2.0 * np.eye(n) + 0.3 * rng.uniform(-1.0, 1.0, (n, n))
    K = np.linalg.solve(B, target - A)
    D = rng.uniform(-1.0, 1.0, (n, 1))
    return PlantModel(A=A, B=B, D=D, K=K, dt=0.1, n_levels=5)
