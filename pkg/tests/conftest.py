import numpy as np
import pytest

import distlqr as d

VEHICLE_A = [[0.0, 1.0], [-1.0, -0.1]]
VEHICLE_BBAR = [[0.0], [1.0]]
VEHICLE_C = [[1.0, 0.0]]


@pytest.fixture(scope="session")
def vehicle_model():
    return d.AgentModel(A=VEHICLE_A, Bbar=VEHICLE_BBAR, C=VEHICLE_C)


@pytest.fixture(scope="session")
def cycle5():
    return d.cyclic_graph(5)


def vehicle_weights(q2: float) -> d.MeeWeights:
    return d.MeeWeights(Q1=[[10.0]], Q2=[[q2]], R=[[1.0]])


@pytest.fixture(scope="session")
def vehicle_designs(vehicle_model, cycle5):
    """Synthesized designs for both demo weightings (expensive, share them)."""
    return {
        q2: d.synthesize_observer(vehicle_model, vehicle_weights(q2), cycle5)
        for q2 in (5.0, 25.0)
    }


def match_spectra(a, b) -> float:
    """Max distance under an optimal pairing of two eigenvalue multisets."""
    from scipy.optimize import linear_sum_assignment

    a = np.asarray(a)
    b = np.asarray(b)
    assert a.shape == b.shape
    cost = np.abs(a[:, None] - b[None, :])
    rows, cols = linear_sum_assignment(cost)
    return float(cost[rows, cols].max())
