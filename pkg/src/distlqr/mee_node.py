"""Single-agent minimum-energy estimation.

Pipeline for one agent:

1. ``output_normalize`` rotates the state so the output matrix takes the
   form [0 C2] with C2 square and invertible.
2. ``node_mee_gain`` solves the dual Riccati equation for the optimal node
   observer gain; the optimal cost is trace(S).
3. ``decouple_transform`` applies a second (triangular) change of
   coordinates that block-diagonalises S and zeroes the upper block of the
   gain, the structure the network-level trace minimisation relies on.

Coordinates: "normalized" means after step 1, "hat" after step 2. The
composed state map is x_hat = T_hat @ T @ x. Costs are reported in hat
coordinates (where the network optimisation is posed) and in original
coordinates; the two node traces coincide because T is orthogonal.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import SynthesisError
from .matops import (
    AgentModel,
    _as_matrix,
    _check_psd,
    _check_spd,
    solve_dual_are,
    symmetrize,
)

#: Condition-number limit on S22 before the decoupling transform is refused.
S22_CONDITION_LIMIT = 1e12


@dataclass(frozen=True)
class MeeWeights:
    """Estimation weights: Q1, Q2 (m x m) on absolute/relative output error,
    R (q x q) on the disturbance. Q1 and R must be positive definite; Q2 may
    be positive semidefinite (Q2 = 0 disables relative-error coupling)."""

    Q1: np.ndarray
    Q2: np.ndarray
    R: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "Q1", _check_spd(self.Q1, "Q1"))
        object.__setattr__(self, "Q2", _check_psd(self.Q2, "Q2"))
        object.__setattr__(self, "R", _check_spd(self.R, "R"))
        if self.Q2.shape != self.Q1.shape:
            raise ValueError(
                f"Q1 {self.Q1.shape} and Q2 {self.Q2.shape} must have equal shape"
            )


@dataclass(frozen=True)
class NormalizedModel:
    """Agent model after the orthogonal output-normalising rotation.

    transform is orthogonal with C_normalized = C_original @ transform.T,
    and the transformed output matrix has the exact pattern [0 C2].
    """

    original: AgentModel
    transform: np.ndarray
    A: np.ndarray
    Bbar: np.ndarray
    C: np.ndarray
    C2: np.ndarray
    c2_condition: float

    @property
    def n_states(self) -> int:
        return self.A.shape[0]

    @property
    def n_outputs(self) -> int:
        return self.C.shape[0]


@dataclass(frozen=True)
class NodeObserver:
    """Node-level observer data, filled in two stages.

    ``node_mee_gain`` populates the normalized-coordinate solution (S, L)
    and the optimal cost trace(S). ``decouple_transform`` adds the hat
    quantities: t_hat, the transformed model, the block-diagonal s_hat and
    the structured gain l_hat = [0; l2].
    """

    normalized: NormalizedModel
    S: np.ndarray
    L: np.ndarray
    cost_node: float
    t_hat: np.ndarray | None = None
    a_hat: np.ndarray | None = None
    bbar_hat: np.ndarray | None = None
    c_hat: np.ndarray | None = None
    s_hat: np.ndarray | None = None
    l_hat: np.ndarray | None = None
    l2: np.ndarray | None = None
    cost_node_hat: float | None = None

    @property
    def gain_original(self) -> np.ndarray:
        """Observer gain mapped back to the original state coordinates."""
        return self.normalized.transform.T @ self.L

    @property
    def total_transform(self) -> np.ndarray:
        """Composed map original -> hat coordinates."""
        if self.t_hat is None:
            raise ValueError("decouple_transform has not been applied yet")
        return self.t_hat @ self.normalized.transform


def output_normalize(model: AgentModel, rank_rtol: float = 1e-9) -> NormalizedModel:
    """Rotate the state so the output matrix becomes [0 C2], C2 invertible.

    Uses the SVD C = U [Sigma 0] V' and the fixed block rotation that moves
    the measured directions to the last m coordinates. Signs of the singular
    vectors are chosen so C2 has a positive diagonal where possible, making
    the transform reproducible.
    """
    a, bbar, c = model.A, model.Bbar, model.C
    n, m = model.n_states, model.n_outputs
    u, sigma, vt = np.linalg.svd(c)
    if sigma[-1] <= rank_rtol * sigma[0]:
        raise SynthesisError(
            f"output matrix is rank deficient (sigma_min/sigma_max = "
            f"{sigma[-1] / sigma[0]:.3e})"
        )
    # C2 = U diag(sigma); flip singular-vector pairs so its diagonal is >= 0.
    for k in range(m):
        if u[k, k] < 0.0:
            u[:, k] *= -1.0
            vt[k, :] *= -1.0

    rotation = np.zeros((n, n))
    rotation[: n - m, m:] = np.eye(n - m)
    rotation[n - m :, : m] = np.eye(m)
    transform = rotation @ vt

    a_n = transform @ a @ transform.T
    bbar_n = transform @ bbar
    c_n = c @ transform.T
    leak = np.linalg.norm(c_n[:, : n - m])
    if leak > 1e-12 * max(1.0, np.linalg.norm(c_n)):
        raise SynthesisError(f"output normalisation failed (leak {leak:.3e})")
    c_n[:, : n - m] = 0.0
    c2 = c_n[:, n - m :]
    return NormalizedModel(
        original=model,
        transform=transform,
        A=a_n,
        Bbar=bbar_n,
        C=c_n,
        C2=c2,
        c2_condition=float(sigma[0] / sigma[-1]),
    )


def node_mee_gain(normalized: NormalizedModel, weights: MeeWeights,
                  residual_tol: float = 1e-8) -> NodeObserver:
    """Optimal node observer gain from the dual Riccati equation.

    Solves A S + S A' + Bbar R^-1 Bbar' - S C' Q1 C S = 0 in normalized
    coordinates and returns L = S C' Q1 together with the optimal cost
    trace(S).
    """
    s, gain = solve_dual_are(
        normalized.A, normalized.Bbar, normalized.C, weights.Q1, weights.R,
        residual_tol=residual_tol,
    )
    return NodeObserver(
        normalized=normalized, S=s, L=gain, cost_node=float(np.trace(s))
    )


def decouple_transform(node: NodeObserver, weights: MeeWeights) -> NodeObserver:
    """Second change of coordinates that block-diagonalises S.

    With S partitioned into S11 ((n-m) x (n-m)), S12 and S22 (m x m), the
    unit upper-triangular map

        T_hat = [[I, -S12 S22^-1], [0, I]]

    gives T_hat S T_hat' = diag(S11 - S12 S22^-1 S12', S22), leaves the
    output pattern [0 C2] unchanged, and turns the gain into [0; l2] with
    l2 = S22 C2' Q1 invertible.
    """
    nm = node.normalized
    n, m = nm.n_states, nm.n_outputs
    k = n - m
    s = node.S
    s22 = symmetrize(s[k:, k:])
    cond_s22 = float(np.linalg.cond(s22))
    if cond_s22 > S22_CONDITION_LIMIT:
        raise SynthesisError(
            f"S22 is numerically singular (condition number {cond_s22:.3e})"
        )

    t_hat = np.eye(n)
    t_hat_inv = np.eye(n)
    if k > 0:
        s12 = s[:k, k:]
        coupling = np.linalg.solve(s22.T, s12.T).T  # S12 S22^-1
        t_hat[:k, k:] = -coupling
        t_hat_inv[:k, k:] = coupling

    a_hat = t_hat @ nm.A @ t_hat_inv
    bbar_hat = t_hat @ nm.Bbar
    c_hat = nm.C  # pattern [0 C2] is invariant under t_hat
    s_hat = symmetrize(t_hat @ s @ t_hat.T)

    off = np.linalg.norm(s_hat[:k, k:])
    if off > 1e-8 * max(1.0, np.linalg.norm(s_hat)):
        raise SynthesisError(
            f"decoupling failed: off-diagonal block norm {off:.3e}"
        )

    l2 = s22 @ nm.C2.T @ weights.Q1
    l_hat = np.vstack([np.zeros((k, m)), l2])
    mapped = t_hat @ node.L
    dev = np.linalg.norm(mapped - l_hat)
    if dev > 1e-8 * max(1.0, np.linalg.norm(l_hat)):
        raise SynthesisError(
            f"gain structure [0; l2] violated (deviation {dev:.3e})"
        )

    return replace(
        node,
        t_hat=t_hat,
        a_hat=a_hat,
        bbar_hat=bbar_hat,
        c_hat=c_hat,
        s_hat=s_hat,
        l_hat=l_hat,
        l2=l2,
        cost_node_hat=float(np.trace(s_hat)),
    )


def design_node_observer(model: AgentModel, weights: MeeWeights,
                         residual_tol: float = 1e-8) -> NodeObserver:
    """Full node pipeline: normalize, solve the dual ARE, decouple."""
    normalized = output_normalize(model)
    node = node_mee_gain(normalized, weights, residual_tol=residual_tol)
    return decouple_transform(node, weights)


def _require_weights_match(model: AgentModel, weights: MeeWeights) -> None:
    m, q = model.n_outputs, model.n_disturbances
    if weights.Q1.shape != (m, m):
        raise ValueError(
            f"Q1 must be {m}x{m} for an {m}-output model, got {weights.Q1.shape}"
        )
    if weights.R.shape != (q, q):
        raise ValueError(
            f"R must be {q}x{q} for {q} disturbance channels, got {weights.R.shape}"
        )
