import numpy as np
import pytest
import scipy.linalg

from distlqr import (
    AgentModel,
    SynthesisError,
    is_hurwitz,
    kron,
    solve_care,
    solve_dual_are,
    solve_lyapunov,
)
from distlqr.matops import sqrtm_psd


def _rng(seed=0):
    return np.random.Generator(np.random.Philox(seed))


def _spd(rng, n, shift=0.1):
    m = rng.standard_normal((n, n))
    return m @ m.T + shift * np.eye(n)


def care_residual(a, b, q, r, p):
    return np.linalg.norm(
        a.T @ p + p @ a - p @ b @ np.linalg.solve(r, b.T @ p) + q
    )


def dual_residual(a, bbar, c, q, r, s):
    return np.linalg.norm(
        a @ s + s @ a.T + bbar @ np.linalg.solve(r, bbar.T) - s @ c.T @ q @ c @ s
    )


# ---------------------------------------------------------------- kron

def test_kron_identity_first_factor():
    b = np.array([[1.0, 2.0], [3.0, 4.0]])
    out = kron(np.eye(2), b)
    assert np.array_equal(out, scipy.linalg.block_diag(b, b))


def test_kron_scalar_second_factor():
    swap = np.array([[0.0, 1.0], [1.0, 0.0]])
    assert np.array_equal(kron(swap, np.eye(1)), swap)


def test_kron_mixed_product_property():
    rng = _rng(1)
    for _ in range(20):
        a, b, c, d = (rng.standard_normal((2, 2)) for _ in range(4))
        lhs = kron(a, b) @ kron(c, d)
        rhs = kron(a @ c, b @ d)
        assert np.linalg.norm(lhs - rhs) <= 1e-12 * max(1.0, np.linalg.norm(rhs))


# ---------------------------------------------------------------- CARE

def test_care_scalar_integrator():
    p = solve_care([[0.0]], [[1.0]], [[1.0]], [[1.0]])
    assert np.allclose(p, [[1.0]], atol=1e-12)


def test_care_scalar_unstable():
    # 2p - p^2 + 3 = 0, stabilizing root p = 1 + sqrt(1 + 3) = 3
    p = solve_care([[1.0]], [[1.0]], [[3.0]], [[1.0]])
    assert np.allclose(p, [[3.0]], atol=1e-12)


def test_care_random_certificates():
    rng = _rng(2)
    for _ in range(25):
        n, m = 4, 2
        a = rng.standard_normal((n, n))
        b = rng.standard_normal((n, m))
        q = _spd(rng, n)
        r = _spd(rng, m)
        p = solve_care(a, b, q, r)
        assert care_residual(a, b, q, r, p) <= 1e-8 * max(1.0, np.linalg.norm(p))
        closed = a - b @ np.linalg.solve(r, b.T @ p)
        hurwitz, _ = is_hurwitz(closed)
        assert hurwitz
        w = np.linalg.eigvalsh(p)
        assert w[0] > 0.0


def test_care_matches_scipy_oracle():
    rng = _rng(3)
    for _ in range(10):
        n, m = 3, 2
        a = rng.standard_normal((n, n))
        b = rng.standard_normal((n, m))
        q = _spd(rng, n)
        r = _spd(rng, m)
        p = solve_care(a, b, q, r)
        ref = scipy.linalg.solve_continuous_are(a, b, q, r)
        assert np.linalg.norm(p - ref) <= 1e-7 * max(1.0, np.linalg.norm(ref))


def test_care_unstabilizable_reports_eigenvalue():
    with pytest.raises(SynthesisError, match="stabilizable"):
        solve_care([[1.0]], [[0.0]], [[1.0]], [[1.0]])


def test_care_undetectable_rejected():
    with pytest.raises(SynthesisError, match="detectable"):
        solve_care([[1.0]], [[1.0]], [[0.0]], [[1.0]])


def test_care_indefinite_weights_rejected():
    with pytest.raises(SynthesisError):
        solve_care([[0.0]], [[1.0]], [[1.0]], [[-1.0]])
    with pytest.raises(SynthesisError):
        solve_care(np.zeros((2, 2)), np.eye(2), np.diag([1.0, -0.5]), np.eye(2))


# ---------------------------------------------------------------- dual ARE

def test_dual_are_scalar():
    s, gain = solve_dual_are([[0.0]], [[1.0]], [[1.0]], [[1.0]], [[1.0]])
    assert np.allclose(s, [[1.0]], atol=1e-12)
    assert np.allclose(gain, [[1.0]], atol=1e-12)


def test_dual_are_transposition_duality():
    rng = _rng(4)
    for _ in range(15):
        n, m, q = 3, 2, 2
        a = rng.standard_normal((n, n))
        bbar = rng.standard_normal((n, q))
        c = rng.standard_normal((m, n))
        qw = _spd(rng, m)
        rw = _spd(rng, q)
        s, gain = solve_dual_are(a, bbar, c, qw, rw)
        p = solve_care(a.T, c.T, bbar @ np.linalg.solve(rw, bbar.T),
                       np.linalg.inv(qw))
        assert np.linalg.norm(s - p) <= 1e-8 * max(1.0, np.linalg.norm(p))
        assert np.allclose(gain, s @ c.T @ qw)


def test_dual_are_vehicle_gain(vehicle_model):
    s, gain = solve_dual_are(vehicle_model.A, vehicle_model.Bbar,
                             vehicle_model.C, [[10.0]], [[1.0]])
    assert dual_residual(vehicle_model.A, vehicle_model.Bbar, vehicle_model.C,
                         np.array([[10.0]]), np.array([[1.0]]), s) <= 1e-8
    ref = scipy.linalg.solve_continuous_are(
        vehicle_model.A.T, vehicle_model.C.T,
        vehicle_model.Bbar @ vehicle_model.Bbar.T, np.array([[0.1]])
    )
    assert np.linalg.norm(s - ref) <= 1e-7
    hurwitz, _ = is_hurwitz(vehicle_model.A - gain @ vehicle_model.C)
    assert hurwitz


def test_dual_are_unobservable_rejected():
    a = np.diag([1.0, 2.0])
    with pytest.raises(SynthesisError, match="observable"):
        solve_dual_are(a, np.eye(2), [[1.0, 0.0]], [[1.0]], np.eye(2))


def test_dual_are_uncontrollable_rejected():
    a = np.diag([1.0, 2.0])
    with pytest.raises(SynthesisError, match="controllable"):
        solve_dual_are(a, [[1.0], [0.0]], np.eye(2), np.eye(2), [[1.0]])


# ---------------------------------------------------------------- Lyapunov

def test_lyapunov_scalars():
    assert np.allclose(solve_lyapunov([[-1.0]], [[2.0]]), [[1.0]], atol=1e-14)
    assert np.allclose(solve_lyapunov(-np.eye(2), np.eye(2)), 0.5 * np.eye(2),
                       atol=1e-14)


def test_lyapunov_random_residual():
    rng = _rng(5)
    for _ in range(20):
        n = 4
        f = rng.standard_normal((n, n))
        f -= (np.max(np.linalg.eigvals(f).real) + 0.5) * np.eye(n)
        w = _spd(rng, n)
        s = solve_lyapunov(f, w)
        res = np.linalg.norm(f @ s + s @ f.T + w)
        assert res <= 1e-10 * max(1.0, np.linalg.norm(s))
        assert np.linalg.eigvalsh(s)[0] >= -1e-12


def test_lyapunov_kronecker_oracle():
    rng = _rng(6)
    for n in (2, 3, 5):
        f = rng.standard_normal((n, n))
        f -= (np.max(np.linalg.eigvals(f).real) + 1.0) * np.eye(n)
        w = _spd(rng, n)
        s = solve_lyapunov(f, w)
        # vec(F S + S F') = (I (x) F + F (x) I) vec(S), column-major stacking
        lin = np.kron(np.eye(n), f) + np.kron(f, np.eye(n))
        vec_s = np.linalg.solve(lin, -w.flatten("F"))
        oracle = vec_s.reshape((n, n), order="F")
        assert np.linalg.norm(s - oracle) <= 1e-9 * max(1.0, np.linalg.norm(oracle))


def test_lyapunov_requires_hurwitz():
    with pytest.raises(SynthesisError, match="Hurwitz"):
        solve_lyapunov([[1.0]], [[1.0]])


# ---------------------------------------------------------------- Hurwitz

def test_is_hurwitz_examples():
    ok, alpha = is_hurwitz(-np.eye(3))
    assert ok and np.isclose(alpha, -1.0)
    ok, alpha = is_hurwitz([[0.0, 1.0], [-1.0, 0.0]])
    assert not ok and abs(alpha) <= 1e-12


def test_dual_are_loop_always_hurwitz():
    rng = _rng(7)
    for _ in range(10):
        n = 3
        a = rng.standard_normal((n, n))
        bbar = rng.standard_normal((n, 2))
        c = rng.standard_normal((1, n))
        _, gain = solve_dual_are(a, bbar, c, [[1.0]], _spd(rng, 2))
        ok, _ = is_hurwitz(a - gain @ c)
        assert ok


# ---------------------------------------------------------------- model type

def test_agent_model_validation():
    with pytest.raises(ValueError):
        AgentModel(A=[[0.0, 1.0]], Bbar=[[1.0]], C=[[1.0]])
    with pytest.raises(ValueError):
        AgentModel(A=np.eye(2), Bbar=np.eye(2), C=[[1.0, 0.0], [2.0, 0.0]])
    with pytest.raises(ValueError):  # more outputs than states
        AgentModel(A=[[1.0]], Bbar=[[1.0]], C=[[1.0], [0.5]])
    model = AgentModel(A=np.eye(2), Bbar=[[1.0], [0.0]], C=[[1.0, 0.0]])
    assert model.n_states == 2 and model.n_outputs == 1
    assert model.n_disturbances == 1 and model.n_inputs == 0


def test_sqrtm_psd():
    rng = _rng(8)
    m = _spd(rng, 4)
    root = sqrtm_psd(m)
    assert np.linalg.norm(root @ root - m) <= 1e-10 * np.linalg.norm(m)
    with pytest.raises(ValueError):
        sqrtm_psd(np.diag([1.0, -1.0]))
