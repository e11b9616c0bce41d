import numpy as np
import pytest

import distlqr as d
from distlqr.mee_node import (
    MeeWeights,
    NodeObserver,
    decouple_transform,
    design_node_observer,
    node_mee_gain,
    output_normalize,
)
from conftest import match_spectra, vehicle_weights


def _rng(seed=0):
    return np.random.Generator(np.random.Philox(seed))


def dual_residual(a, bbar, c, q, r, s):
    return np.linalg.norm(
        a @ s + s @ a.T + bbar @ np.linalg.solve(r, bbar.T) - s @ c.T @ q @ c @ s
    )


# ------------------------------------------------------- output rotation

def test_normalize_already_in_form():
    model = d.AgentModel(A=np.diag([-1.0, -2.0, -3.0]), Bbar=np.eye(3),
                         C=[[0.0, 0.0, 2.0]])
    nm = output_normalize(model)
    assert np.all(nm.C[:, :2] == 0.0)
    assert abs(nm.C2[0, 0]) > 0.0
    # orthogonal state map and exact output reconstruction
    assert np.allclose(nm.transform @ nm.transform.T, np.eye(3), atol=1e-12)
    assert np.allclose(nm.C @ nm.transform, model.C, atol=1e-12)


def test_normalize_vehicle(vehicle_model):
    nm = output_normalize(vehicle_model)
    assert np.allclose(nm.C, [[0.0, 1.0]], atol=1e-12)
    assert np.allclose(nm.C2, [[1.0]], atol=1e-12)
    assert nm.c2_condition == 1.0


def test_normalize_reconstruction_random():
    rng = _rng(21)
    for _ in range(10):
        c = rng.standard_normal((1, 3))
        model = d.AgentModel(A=rng.standard_normal((3, 3)),
                             Bbar=rng.standard_normal((3, 1)), C=c)
        nm = output_normalize(model)
        assert np.linalg.norm(nm.C @ nm.transform - c) <= 1e-12 * np.linalg.norm(c)
        assert np.linalg.norm(nm.C[:, :2]) == 0.0
        # model matrices transform consistently
        assert np.allclose(nm.A, nm.transform @ model.A @ nm.transform.T)


def test_normalize_positive_diagonal_convention():
    model = d.AgentModel(A=-np.eye(2), Bbar=np.eye(2), C=[[-3.0, 0.0]])
    nm = output_normalize(model)
    assert nm.C2[0, 0] > 0.0


def test_normalize_square_output_matrix():
    model = d.AgentModel(A=-np.eye(2), Bbar=np.eye(2),
                         C=[[0.0, 2.0], [1.0, 0.0]])
    nm = output_normalize(model)
    assert nm.C.shape == (2, 2)
    assert np.linalg.matrix_rank(nm.C2) == 2


# ------------------------------------------------------- node gain

def test_node_gain_scalar_closed_form():
    model = d.AgentModel(A=[[-1.0]], Bbar=[[1.0]], C=[[1.0]])
    nm = output_normalize(model)
    node = node_mee_gain(nm, MeeWeights([[1.0]], [[0.0]], [[1.0]]))
    s_expected = -1.0 + np.sqrt(2.0)
    assert np.allclose(node.S, [[s_expected]], atol=1e-12)
    assert np.allclose(np.abs(node.L), [[s_expected]], atol=1e-12)
    assert np.isclose(node.cost_node, s_expected)


def test_node_gain_vehicle_consistent_with_dual_are(vehicle_model):
    node = design_node_observer(vehicle_model, vehicle_weights(5.0))
    s_ref, l_ref = d.solve_dual_are(vehicle_model.A, vehicle_model.Bbar,
                                    vehicle_model.C, [[10.0]], [[1.0]])
    assert np.allclose(node.gain_original, l_ref, atol=1e-8)
    assert np.isclose(node.cost_node, np.trace(s_ref), atol=1e-9)


def test_trace_invariant_under_rotation():
    rng = _rng(22)
    for _ in range(5):
        a = rng.standard_normal((3, 3))
        bbar = rng.standard_normal((3, 2))
        c = rng.standard_normal((1, 3))
        model = d.AgentModel(A=a, Bbar=bbar, C=c)
        w = MeeWeights([[2.0]], [[0.0]], np.eye(2))
        node = node_mee_gain(output_normalize(model), w)
        s_orig, _ = d.solve_dual_are(a, bbar, c, w.Q1, w.R)
        assert np.isclose(node.cost_node, np.trace(s_orig), atol=1e-9)


# ------------------------------------------------------- decoupling

def test_decouple_identity_when_block_diagonal():
    # synthetic observer whose S is already block diagonal
    model = d.AgentModel(A=np.diag([-1.0, -2.0]), Bbar=np.eye(2),
                         C=[[0.0, 1.0]])
    nm = output_normalize(model)
    q1 = np.array([[1.0]])
    s = np.diag([0.5, 0.25])
    gain = s @ nm.C.T @ q1
    node = NodeObserver(normalized=nm, S=s, L=gain, cost_node=float(np.trace(s)))
    node = decouple_transform(node, MeeWeights(q1, [[0.0]], np.eye(2)))
    assert np.array_equal(node.t_hat, np.eye(2))
    assert np.allclose(node.s_hat, s)


def test_decouple_vehicle(vehicle_model):
    w = vehicle_weights(5.0)
    node = design_node_observer(vehicle_model, w)
    # congruence oracle: t_hat S t_hat' must be block diagonal
    s_hat = node.t_hat @ node.S @ node.t_hat.T
    assert abs(s_hat[0, 1]) <= 1e-10
    assert np.allclose(node.s_hat, s_hat, atol=1e-12)
    # gain pattern [0; l2] with invertible l2
    assert node.l_hat[0, 0] == 0.0
    assert abs(np.linalg.det(node.l2)) > 0.0
    # hat-coordinate dual Riccati residual
    res = dual_residual(node.a_hat, node.bbar_hat, node.c_hat, w.Q1, w.R,
                        node.s_hat)
    assert res <= 1e-8 * max(1.0, np.linalg.norm(node.s_hat))


def test_decouple_random_models():
    rng = _rng(23)
    for _ in range(5):
        a = rng.standard_normal((4, 4))
        bbar = rng.standard_normal((4, 2))
        c = rng.standard_normal((2, 4))
        model = d.AgentModel(A=a, Bbar=bbar, C=c)
        q = rng.standard_normal((2, 2)); q = q @ q.T + 0.5 * np.eye(2)
        w = MeeWeights(q, np.zeros((2, 2)), np.eye(2))
        node = design_node_observer(model, w)
        off = node.s_hat[:2, 2:]
        assert np.linalg.norm(off) <= 1e-8 * max(1.0, np.linalg.norm(node.s_hat))
        res = dual_residual(node.a_hat, node.bbar_hat, node.c_hat, w.Q1, w.R,
                            node.s_hat)
        assert res <= 1e-8 * max(1.0, np.linalg.norm(node.s_hat))


def test_spectrum_preserved_by_transforms(vehicle_model):
    node = design_node_observer(vehicle_model, vehicle_weights(5.0))
    loop_hat = node.a_hat - node.l_hat @ node.c_hat
    loop_orig = vehicle_model.A - node.gain_original @ vehicle_model.C
    err = match_spectra(np.linalg.eigvals(loop_hat), np.linalg.eigvals(loop_orig))
    assert err <= 1e-9


def test_gain_maps_through_composed_transform(vehicle_model):
    node = design_node_observer(vehicle_model, vehicle_weights(5.0))
    mapped = node.total_transform @ node.gain_original
    assert np.allclose(mapped, node.l_hat, atol=1e-10)


def test_cost_bookkeeping_coordinates(vehicle_model):
    node = design_node_observer(vehicle_model, vehicle_weights(5.0))
    assert np.isclose(node.cost_node, float(np.trace(node.S)))
    assert np.isclose(node.cost_node_hat, float(np.trace(node.s_hat)))


def test_weights_validation():
    with pytest.raises(d.SynthesisError):
        MeeWeights([[0.0]], [[1.0]], [[1.0]])  # Q1 must be positive definite
    with pytest.raises(d.SynthesisError):
        MeeWeights([[1.0]], [[1.0]], [[0.0]])  # R must be positive definite
    w = MeeWeights([[1.0]], [[0.0]], [[1.0]])  # Q2 = 0 is allowed
    assert np.array_equal(w.Q2, [[0.0]])
