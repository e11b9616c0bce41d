"""Distributed LQR synthesis.

Two complementary routes to a distributed state-feedback gain for N
identical agents coupled through a graph:

* top-down: solve the centralized network regulator under structured
  weights (equal absolute weight Q1, equal pairwise relative weight Q2).
  The network Riccati solution then has constant diagonal and off-diagonal
  blocks obtainable from two node-size equations, and the centralized gain
  can be truncated to the graph sparsity when the nonzero eigenvalues of
  the truncation pattern are large enough relative to the maximum degree.

* bottom-up: keep the node-optimal gain K and add neighbour coupling
  Laplacian (x) (Phi K); the coupling matrix Phi that minimises an upper
  bound of the aggregate cost is obtained by synthesising a distributed
  observer for the transposed data and transposing the result back.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

import numpy as np

from .errors import VerificationError
from .graphs import GraphTopology, max_degree_bound
from .matops import (
    AgentModel,
    _as_matrix,
    _check_psd,
    _check_spd,
    _check_symmetric,
    check_controllable,
    is_hurwitz,
    kron,
    solve_care,
    sqrtm_psd,
)
from .mee_node import MeeWeights


@dataclass(frozen=True)
class LqrWeights:
    """Regulator weights: Q1 >= 0 on absolute states, Q2 >= 0 on pairwise
    state differences, R > 0 on inputs.

    For :func:`bottomup_controller_via_duality` the relative weight acts on
    the input space and Q2 must be m x m (input dimension); everywhere else
    Q2 is n x n like Q1.
    """

    Q1: np.ndarray
    Q2: np.ndarray
    R: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "Q1", _check_psd(self.Q1, "Q1"))
        object.__setattr__(self, "Q2", _check_psd(self.Q2, "Q2"))
        object.__setattr__(self, "R", _check_spd(self.R, "R"))


@dataclass(frozen=True)
class TopDownResult:
    """Block data of the structured centralized solution and its truncation.

    p_node solves the node Riccati equation, p_coupling is the constant
    off-diagonal block of the network solution, k_diag/k_offdiag the
    corresponding gain blocks. k_truncated, condition_ok and
    closed_loop_abscissa are filled by :func:`topdown_truncate`.
    """

    model: AgentModel
    weights: LqrWeights
    n_agents: int
    p_node: np.ndarray
    p_coupling: np.ndarray
    p_network: np.ndarray
    k_diag: np.ndarray
    k_offdiag: np.ndarray
    k_centralized: np.ndarray
    network_residual: float
    k_truncated: np.ndarray | None = None
    condition_ok: bool | None = None
    closed_loop_abscissa: float | None = None


def structured_weights(weights: LqrWeights, n_agents: int
                       ) -> tuple[np.ndarray, np.ndarray]:
    """Network weights with Q1 + (N-1) Q2 on the diagonal and -Q2 elsewhere.

    Returns (Q_net, R_net) with R_net = I_N (x) R.
    """
    if n_agents < 1:
        raise ValueError("n_agents must be >= 1")
    eye = np.eye(n_agents)
    ones = np.ones((n_agents, n_agents))
    q_net = kron(eye, weights.Q1 + n_agents * weights.Q2) - kron(ones, weights.Q2)
    r_net = kron(eye, weights.R)
    return 0.5 * (q_net + q_net.T), r_net


@dataclass(frozen=True)
class CentralizedLqr:
    gain: np.ndarray      # network feedback gain
    riccati: np.ndarray   # network Riccati solution


def centralized_lqr(model: AgentModel, n_agents: int, q_net: np.ndarray,
                    r_net: np.ndarray) -> CentralizedLqr:
    """Optimal network regulator for N decoupled copies of the agent.

    Solves the full-size Riccati equation for I_N (x) A, I_N (x) B and
    returns the gain -R_net^-1 B_net' P_net together with P_net.
    """
    if model.B is None:
        raise ValueError("centralized LQR needs an input matrix B")
    eye = np.eye(n_agents)
    a_net = kron(eye, model.A)
    b_net = kron(eye, model.B)
    p_net = solve_care(a_net, b_net, q_net, r_net)
    gain = -np.linalg.solve(r_net, b_net.T @ p_net)
    return CentralizedLqr(gain=gain, riccati=p_net)


def topdown_blocks(model: AgentModel, weights: LqrWeights,
                   n_agents: int) -> TopDownResult:
    """Node-size construction of the structured centralized solution.

    The network Riccati solution has diagonal blocks P - (N-1) P2 and
    off-diagonal blocks P2, where P solves the node equation with weight Q1
    and U = -N P2 solves a second node equation in the closed-loop matrix
    A - B R^-1 B' P with weight N Q2. The assembled solution is checked
    against the full network equation and the deviation reported.
    """
    if model.B is None:
        raise ValueError("top-down LQR needs an input matrix B")
    a, b, r = model.A, model.B, weights.R
    if weights.Q1.shape != a.shape or weights.Q2.shape != a.shape:
        raise ValueError("Q1 and Q2 must be n x n for the top-down route")
    p_node = solve_care(a, b, weights.Q1, r)
    x_loop = b @ np.linalg.solve(r, b.T)
    u = solve_care(a - x_loop @ p_node, b, n_agents * weights.Q2, r)
    p_coupling = -u / n_agents

    eye = np.eye(n_agents)
    ones = np.ones((n_agents, n_agents))
    p_net = (kron(eye, p_node - n_agents * p_coupling)
             + kron(ones, p_coupling))
    q_net, r_net = structured_weights(weights, n_agents)
    a_net = kron(eye, a)
    b_net = kron(eye, b)
    residual = (a_net.T @ p_net + p_net @ a_net
                - p_net @ b_net @ np.linalg.solve(r_net, b_net.T @ p_net)
                + q_net)
    rel_res = float(np.linalg.norm(residual)
                    / max(1.0, np.linalg.norm(p_net)))
    if rel_res > 1e-6:
        warnings.warn(
            f"assembled network Riccati solution has residual {rel_res:.3e}; "
            "block construction is inconsistent with the full equation",
            RuntimeWarning,
            stacklevel=2,
        )

    k_diag = -np.linalg.solve(r, b.T @ (p_node - (n_agents - 1) * p_coupling))
    k_offdiag = -np.linalg.solve(r, b.T @ p_coupling)
    k_central = -np.linalg.solve(r_net, b_net.T @ p_net)
    return TopDownResult(
        model=model,
        weights=weights,
        n_agents=n_agents,
        p_node=p_node,
        p_coupling=p_coupling,
        p_network=p_net,
        k_diag=k_diag,
        k_offdiag=k_offdiag,
        k_centralized=k_central,
        network_residual=rel_res,
    )


def topdown_truncate(result: TopDownResult, graph: GraphTopology,
                     pattern: np.ndarray | None = None) -> TopDownResult:
    """Truncate the centralized gain to a sparsity pattern.

    The distributed gain is I_N (x) (-R^-1 B' P) + pattern (x) (R^-1 B' P2)
    with the graph Laplacian as the default pattern. Its stability is
    guaranteed when every nonzero eigenvalue of the pattern exceeds
    (d_max + 1) / 2; the flag condition_ok records whether that spectral
    condition holds. The assembled loop is always checked: a Hurwitz
    failure despite condition_ok raises, while a gain that happens to be
    stabilizing without the condition is returned with condition_ok False.
    """
    model, weights = result.model, result.weights
    n_agents = result.n_agents
    if pattern is None:
        pattern = graph.laplacian
    pattern = _check_symmetric(pattern, "truncation pattern")
    if pattern.shape != (n_agents, n_agents):
        raise ValueError(
            f"pattern must be {n_agents}x{n_agents}, got {pattern.shape}"
        )

    b, r = model.B, weights.R
    k_node = -np.linalg.solve(r, b.T @ result.p_node)
    coupling = np.linalg.solve(r, b.T @ result.p_coupling)
    k_hat = kron(np.eye(n_agents), k_node) + kron(pattern, coupling)

    eigs = np.linalg.eigvalsh(pattern)
    scale = max(1.0, float(np.abs(eigs).max()))
    nonzero = eigs[np.abs(eigs) > 1e-9 * scale]
    threshold = max_degree_bound(graph) / 2.0
    condition_ok = bool(np.all(nonzero > threshold))

    a_cl = kron(np.eye(n_agents), model.A) + kron(np.eye(n_agents), b) @ k_hat
    hurwitz, alpha = is_hurwitz(a_cl)
    if condition_ok and not hurwitz:
        raise VerificationError(
            f"spectral condition held but the truncated loop is unstable "
            f"(abscissa {alpha:.3e}); truncation construction is inconsistent"
        )
    return replace(
        result,
        k_truncated=k_hat,
        condition_ok=condition_ok,
        closed_loop_abscissa=float(alpha),
    )


def bottomup_gain(k_node: np.ndarray, phi: np.ndarray,
                  graph: GraphTopology) -> np.ndarray:
    """Distributed gain I_N (x) K + Laplacian (x) (Phi K)."""
    k_node = _as_matrix(k_node)
    phi = _as_matrix(phi)
    m = k_node.shape[0]
    if phi.shape != (m, m):
        raise ValueError(f"phi must be {m}x{m} to left-multiply K, got {phi.shape}")
    return (kron(np.eye(graph.n_agents), k_node)
            + kron(graph.laplacian, phi @ k_node))


@dataclass(frozen=True)
class BottomUpControl:
    """Bottom-up distributed regulator obtained through estimation duality."""

    k_node: np.ndarray
    phi: np.ndarray
    k_dist: np.ndarray
    cost_bound: float
    closed_loop_abscissa: float
    dual_design: "object"  # the underlying ObserverDesign on transposed data


def bottomup_controller_via_duality(model: AgentModel, weights: LqrWeights,
                                    graph: GraphTopology) -> BottomUpControl:
    """Optimal coupling for the bottom-up gain structure, by transposition.

    The regulator problem for (A, B) with state weight Q1 and input weights
    (R absolute, Q2 relative; both m x m, see LqrWeights) is the transpose
    of a distributed estimation problem for (A', Q1^(1/2), B') with output
    weights (R^-1, Q2) and unit disturbance weight. That problem is solved
    with :func:`distlqr.dist_observer.synthesize_observer` and the gains are
    transposed back: K = -L', Phi = Phi_dual'.

    Requires (A, B) controllable and (A, Q1^(1/2)) observable.
    """
    from .dist_observer import synthesize_observer

    if model.B is None:
        raise ValueError("bottom-up control needs an input matrix B")
    a, b = model.A, model.B
    n, m = model.n_states, model.n_inputs
    check_controllable(a, b)
    if weights.Q1.shape != (n, n):
        raise ValueError(f"Q1 must be {n}x{n}, got {weights.Q1.shape}")
    if weights.Q2.shape != (m, m):
        raise ValueError(
            f"the bottom-up relative weight acts on the input space and must "
            f"be {m}x{m}, got {weights.Q2.shape}"
        )
    if weights.R.shape != (m, m):
        raise ValueError(f"R must be {m}x{m}, got {weights.R.shape}")

    dual_model = AgentModel(A=a.T, Bbar=sqrtm_psd(weights.Q1), C=b.T)
    dual_weights = MeeWeights(
        Q1=np.linalg.inv(weights.R), Q2=weights.Q2, R=np.eye(n)
    )
    design = synthesize_observer(dual_model, dual_weights, graph)

    k_node = -design.gain_original.T
    phi = design.phi.T
    k_dist = bottomup_gain(k_node, phi, graph)
    a_cl = (kron(np.eye(graph.n_agents), a)
            + kron(np.eye(graph.n_agents), b) @ k_dist)
    hurwitz, alpha = is_hurwitz(a_cl)
    if not hurwitz:
        raise VerificationError(
            f"bottom-up network loop not Hurwitz (abscissa {alpha:.3e})"
        )
    return BottomUpControl(
        k_node=k_node,
        phi=phi,
        k_dist=k_dist,
        cost_bound=design.gamma_hat,
        closed_loop_abscissa=float(alpha),
        dual_design=design,
    )
