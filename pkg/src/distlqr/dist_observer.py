"""Distributed observer synthesis.

Every agent runs the optimal node observer plus a correction proportional
to the relative output errors of its graph neighbours, weighted by a single
coupling matrix Phi. The networked estimate-error dynamics

    A_err = I_N (x) (A - L C)  -  Laplacian (x) (L Phi C)

decouple under the orthogonal network transform built from the Laplacian
eigenvectors into one subsystem per eigenvalue lambda_i, each carrying the
output weight Q1 + lambda_i * Q2. Phi is obtained from a trace-minimisation
semidefinite program over structured per-mode certificates:

* per mode i a block-diagonal W_i = diag(W_i1, W2) with W2 shared by all
  modes, a slack Z_i = diag(Z_i1, Z2) with shared Z2, and a shared matrix
  Y = [0; Y2] standing in for W_i L Phi;
* per mode, a negativity constraint (``lmi1_block``) equivalent, via a
  Schur complement, to the inequality certifying trace(W_i^-1) bounds the
  mode's estimation cost, plus [[-Z_i, I], [I, -W_i]] < 0 (``lmi2_block``)
  forcing Z_i > W_i^-1;
* objective: sum of trace(Z_i) over modes (an upper bound on the networked
  cost), after which Phi = l2^-1 W2^-1 Y2.

The uncoupled (lambda = 0) mode is independent of Phi and often pins the
bound, leaving the minimiser degenerate in Y2. The solve therefore runs two
stages: minimise the trace bound, then, holding the bound at its optimum,
maximise the summed strictness margins of the per-mode constraints.
Deepening those inequalities pushes the actual per-mode error dynamics
further below their certificates, so the second stage picks the coupling
that the bound alone cannot distinguish. Both stages are plain SDPs and the
rule is deterministic.

All constraints are re-checked outside the solver with plain eigenvalue
computations before a design is accepted.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
import scipy.linalg
from scipy.optimize import linear_sum_assignment

from .errors import SynthesisError, VerificationError
from .graphs import GraphTopology
from .matops import (
    AgentModel,
    is_hurwitz,
    kron,
    solve_dual_are,
    solve_lyapunov,
    sqrtm_psd,
    symmetrize,
)
from .mee_node import (
    MeeWeights,
    NodeObserver,
    _require_weights_match,
    design_node_observer,
)

#: Relative strictness margin required of every LMI block at the solution.
FEASIBILITY_TOL = 1e-7
#: Slack allowed in the cost chain sum-of-optima <= achieved <= bound.
CHAIN_SLACK = 1e-6
#: Tolerance of the mode-union spectral identity check.
MODE_UNION_TOL = 1e-9
#: Relative clustering width for treating Laplacian eigenvalues as equal.
EIGENVALUE_CLUSTER_RTOL = 1e-9


@dataclass(frozen=True)
class ModeProblem:
    """One decoupled estimation subproblem per distinct Laplacian eigenvalue."""

    index: int
    eigenvalue: float
    multiplicity: int
    q_weight: np.ndarray  # Q1 + eigenvalue * Q2, positive definite
    node: NodeObserver    # hat-coordinate model, gain and transforms


@dataclass(frozen=True)
class SdpSolution:
    """Numeric outcome of the trace-minimisation program."""

    w1_blocks: tuple[np.ndarray, ...]
    w2: np.ndarray
    y2: np.ndarray
    z1_blocks: tuple[np.ndarray, ...]
    z2: np.ndarray
    gamma_hat: float
    status: str
    max_lmi_eigenvalue: float
    phi_fixed_zero: bool

    def w_full(self, i: int) -> np.ndarray:
        """Assembled W_i = diag(W_i1, W2)."""
        if self.w1_blocks[i].size == 0:
            return self.w2
        return scipy.linalg.block_diag(self.w1_blocks[i], self.w2)

    def z_full(self, i: int) -> np.ndarray:
        if self.z1_blocks[i].size == 0:
            return self.z2
        return scipy.linalg.block_diag(self.z1_blocks[i], self.z2)

    def y_full(self) -> np.ndarray:
        k = self.w1_blocks[0].shape[0] if self.w1_blocks[0].size else 0
        return np.vstack([np.zeros((k, self.y2.shape[1])), self.y2])


@dataclass(frozen=True)
class DesignCertificate:
    """Independent post-solution checks of a distributed observer design."""

    a_err_abscissa: float
    a_err_hurwitz: bool
    per_mode_abscissas: tuple[float, ...]
    mode_union_error: float
    mode_union_ok: bool
    lmi1_margins: tuple[tuple[float, float], ...]  # (max eig, required bound)
    lmi2_margins: tuple[tuple[float, float], ...]
    w_min_eigs: tuple[float, ...]
    lmi_ok: bool
    sum_mode_optima: float
    j_achieved: float
    gamma_hat: float
    chain_ok: bool
    passed: bool
    failures: tuple[str, ...]


@dataclass(frozen=True)
class ObserverDesign:
    """Complete synthesis result for one model/weights/graph triple."""

    model: AgentModel
    weights: MeeWeights
    graph: GraphTopology
    node: NodeObserver
    modes: tuple[ModeProblem, ...]
    sdp: SdpSolution
    phi: np.ndarray
    gamma_hat: float
    j_achieved: float
    per_mode_optima: tuple[float, ...]
    sum_mode_optima: float
    gain_original: np.ndarray
    gain_hat: np.ndarray
    a_err: np.ndarray
    output_gain: np.ndarray
    certificate: DesignCertificate | None

    @property
    def transform(self) -> np.ndarray:
        return self.node.normalized.transform

    @property
    def t_hat(self) -> np.ndarray:
        return self.node.t_hat


def assemble_observer(node: NodeObserver, phi: np.ndarray,
                      graph: GraphTopology) -> tuple[np.ndarray, np.ndarray]:
    """Network error matrix and measurement gain of the coupled observer.

    Returns (A_err, G_y) with, in hat coordinates,

        A_err = I (x) (A - L C) - Laplacian (x) (L Phi C)
        G_y   = I (x) L + Laplacian (x) (L Phi)
    """
    a, c, l_hat = node.a_hat, node.c_hat, node.l_hat
    phi = np.atleast_2d(np.asarray(phi, dtype=float))
    m = c.shape[0]
    if phi.shape != (m, m):
        raise ValueError(f"phi must be {m}x{m}, got {phi.shape}")
    n_agents = graph.n_agents
    eye = np.eye(n_agents)
    lap = graph.laplacian
    a_err = kron(eye, a - l_hat @ c) - kron(lap, l_hat @ phi @ c)
    g_y = kron(eye, l_hat) + kron(lap, l_hat @ phi)
    return a_err, g_y


def decouple_modes(node: NodeObserver, weights: MeeWeights,
                   graph: GraphTopology,
                   cluster_rtol: float = EIGENVALUE_CLUSTER_RTOL
                   ) -> tuple[ModeProblem, ...]:
    """One ModeProblem per distinct Laplacian eigenvalue.

    Repeated eigenvalues yield a single mode with its multiplicity recorded;
    identical constraints would otherwise be duplicated in the SDP. Each
    mode carries the output weight Q1 + lambda * Q2, which must be positive
    definite (guaranteed by Q1 > 0, Q2 >= 0, lambda >= 0).
    """
    if node.l_hat is None:
        raise ValueError("node observer must be decoupled first")
    lams = graph.eigvals
    scale = max(1.0, float(abs(lams[-1])))
    modes: list[ModeProblem] = []
    i = 0
    while i < len(lams):
        j = i
        while j + 1 < len(lams) and lams[j + 1] - lams[i] <= cluster_rtol * scale:
            j += 1
        lam = float(np.mean(lams[i : j + 1]))
        if abs(lam) < cluster_rtol * scale:
            lam = 0.0
        q_i = symmetrize(weights.Q1 + lam * weights.Q2)
        w_min = float(np.linalg.eigvalsh(q_i)[0])
        if w_min <= 0.0:
            raise SynthesisError(
                f"mode weight Q1 + {lam:.6g} * Q2 is not positive definite "
                f"(min eig {w_min:.3e})"
            )
        modes.append(
            ModeProblem(
                index=len(modes),
                eigenvalue=lam,
                multiplicity=j - i + 1,
                q_weight=q_i,
                node=node,
            )
        )
        i = j + 1
    return tuple(modes)


def per_mode_optimum(mode: ModeProblem, r_weight: np.ndarray) -> np.ndarray:
    """Unstructured optimum of one decoupled mode: its dual ARE solution."""
    node = mode.node
    s_i, _ = solve_dual_are(
        node.a_hat, node.bbar_hat, node.c_hat, mode.q_weight, r_weight
    )
    return s_i


def lmi1_block(mode: ModeProblem, r_weight: np.ndarray, w_full: np.ndarray,
               y_full: np.ndarray) -> np.ndarray:
    """Numeric evaluation of the mode's main LMI block at a candidate point.

    Block sizes are n + q + m. Negative definiteness of this block is
    equivalent (Schur complement over the -I and -Q_i diagonal blocks) to
    the congruence-transformed cost-bound inequality at W = S^-1.
    """
    node = mode.node
    lam = mode.eigenvalue
    a_cl = node.a_hat - node.l_hat @ node.c_hat
    b_w = node.bbar_hat @ np.linalg.inv(sqrtm_psd(r_weight))
    q = b_w.shape[1]
    m = node.c_hat.shape[0]
    psi = (w_full @ a_cl - lam * y_full @ node.c_hat
           + a_cl.T @ w_full - lam * node.c_hat.T @ y_full.T)
    b1 = w_full @ b_w
    b2 = w_full @ node.l_hat + lam * y_full
    return np.block([
        [symmetrize(psi), b1, b2],
        [b1.T, -np.eye(q), np.zeros((q, m))],
        [b2.T, np.zeros((m, q)), -mode.q_weight],
    ])


def lmi1_expanded(mode: ModeProblem, r_weight: np.ndarray, w_full: np.ndarray,
                  y_full: np.ndarray) -> np.ndarray:
    """The pre-Schur quadratic form whose negativity lmi1_block encodes."""
    node = mode.node
    lam = mode.eigenvalue
    a_cl = node.a_hat - node.l_hat @ node.c_hat
    b_w = node.bbar_hat @ np.linalg.inv(sqrtm_psd(r_weight))
    psi = (w_full @ a_cl - lam * y_full @ node.c_hat
           + a_cl.T @ w_full - lam * node.c_hat.T @ y_full.T)
    b1 = w_full @ b_w
    b2 = w_full @ node.l_hat + lam * y_full
    return symmetrize(psi + b1 @ b1.T
                      + b2 @ np.linalg.solve(mode.q_weight, b2.T))


def lmi2_block(w_full: np.ndarray, z_full: np.ndarray) -> np.ndarray:
    """Slack coupling [[-Z, I], [I, -W]]; negative definite iff Z > W^-1."""
    n = w_full.shape[0]
    return np.block([[-z_full, np.eye(n)], [np.eye(n), -w_full]])


def initial_feasible_point(modes: tuple[ModeProblem, ...],
                           inflation: float = 0.05) -> dict:
    """Structured interior point at Phi = 0.

    The node solution satisfies every mode's cost inequality with equality,
    so the inflated S = (1 + inflation) * s_hat sits strictly inside for
    generic data while keeping the required block-diagonal, shared-W2
    structure. Used for feasibility diagnostics and margin scaling.
    """
    node = modes[0].node
    n = node.a_hat.shape[0]
    m = node.c_hat.shape[0]
    k = n - m
    s_blk = node.s_hat.copy()
    if k > 0:  # drop the (certified tiny) off-diagonal coupling
        s_blk[:k, k:] = 0.0
        s_blk[k:, :k] = 0.0
    s_infl = (1.0 + inflation) * s_blk
    w = np.linalg.inv(s_infl)
    w = symmetrize(w)
    z = symmetrize((1.0 + inflation) * s_infl)
    return {
        "w1": w[:k, :k],
        "w2": w[k:, k:],
        "y2": np.zeros((m, m)),
        "z1": z[:k, :k],
        "z2": z[k:, k:],
    }


@dataclass
class SdpModel:
    """Program description: modes, data and the margins imposed in-solver."""

    modes: tuple[ModeProblem, ...]
    r_weight: np.ndarray
    phi_fixed_zero: bool
    margins_lmi1: tuple[float, ...]
    margins_lmi2: tuple[float, ...]
    margin_w: float
    feas_tol: float = FEASIBILITY_TOL

    @property
    def num_scalar_variables(self) -> int:
        node = self.modes[0].node
        n = node.a_hat.shape[0]
        m = node.c_hat.shape[0]
        k = n - m
        sym = lambda d: d * (d + 1) // 2
        count = sym(m) * 2  # shared W2, Z2
        if not self.phi_fixed_zero:
            count += m * m  # Y2
        count += len(self.modes) * 2 * sym(k)  # per-mode W_i1, Z_i1
        return count


def build_sdp(modes: tuple[ModeProblem, ...], r_weight: np.ndarray,
              feas_tol: float = FEASIBILITY_TOL,
              fix_phi_zero: bool = False,
              margin_scales: tuple[np.ndarray, np.ndarray] | None = None
              ) -> SdpModel:
    """Describe the structured trace-minimisation program.

    Decision variables per mode: W_i1 and Z_i1 (symmetric, (n-m) x (n-m));
    shared across modes: W2, Z2 (symmetric m x m) and Y2 (full m x m).
    Objective: sum over modes of multiplicity * trace(Z_i). Strictness
    margins are imposed inside the solver (scaled from `margin_scales`, or
    from the Phi = 0 interior point) and re-verified independently after
    the solve.
    """
    node = modes[0].node
    m = node.c_hat.shape[0]
    k = node.a_hat.shape[0] - m
    if node.l_hat is None or np.linalg.norm(node.l_hat[:k]) != 0.0:
        raise SynthesisError("gain must have the exact structure [0; l2]")

    if margin_scales is None:
        point = initial_feasible_point(modes)
        w0 = (scipy.linalg.block_diag(point["w1"], point["w2"])
              if k > 0 else point["w2"])
        z0 = (scipy.linalg.block_diag(point["z1"], point["z2"])
              if k > 0 else point["z2"])
        y0 = np.vstack([np.zeros((k, m)), point["y2"]])
        scale1 = np.array([
            max(1.0, np.linalg.norm(lmi1_block(md, r_weight, w0, y0), 2))
            for md in modes
        ])
        scale2 = np.array([
            max(1.0, np.linalg.norm(lmi2_block(w0, z0), 2)) for md in modes
        ])
    else:
        scale1, scale2 = margin_scales
    return SdpModel(
        modes=modes,
        r_weight=r_weight,
        phi_fixed_zero=fix_phi_zero,
        margins_lmi1=tuple(10.0 * feas_tol * s for s in scale1),
        margins_lmi2=tuple(10.0 * feas_tol * s for s in scale2),
        margin_w=feas_tol,
        feas_tol=feas_tol,
    )


def _assemble_program(sdp: SdpModel, gamma_cap: float | None):
    """Build the cvxpy problem: trace minimisation, or margin maximisation
    under a bound cap when `gamma_cap` is given (second stage)."""
    import cvxpy as cp

    node = sdp.modes[0].node
    n = node.a_hat.shape[0]
    m = node.c_hat.shape[0]
    q = node.bbar_hat.shape[1]
    k = n - m
    a_cl = node.a_hat - node.l_hat @ node.c_hat
    b_w = node.bbar_hat @ np.linalg.inv(sqrtm_psd(sdp.r_weight))
    c_hat, l_hat = node.c_hat, node.l_hat

    w2 = cp.Variable((m, m), symmetric=True)
    z2 = cp.Variable((m, m), symmetric=True)
    if sdp.phi_fixed_zero:
        y2 = cp.Constant(np.zeros((m, m)))
    else:
        y2 = cp.Variable((m, m))
    y_full = cp.vstack([np.zeros((k, m)), y2]) if k > 0 else y2

    sym = lambda expr: 0.5 * (expr + expr.T)
    constraints = []
    w1_vars, z1_vars, t_vars = [], [], []
    total = 0
    for md, d1, d2 in zip(sdp.modes, sdp.margins_lmi1, sdp.margins_lmi2):
        lam = md.eigenvalue
        if k > 0:
            w1 = cp.Variable((k, k), symmetric=True)
            z1 = cp.Variable((k, k), symmetric=True)
            zkm = np.zeros((k, m))
            w_full = cp.bmat([[w1, zkm], [zkm.T, w2]])
            z_full = cp.bmat([[z1, zkm], [zkm.T, z2]])
        else:
            w1 = z1 = None
            w_full = w2
            z_full = z2
        w1_vars.append(w1)
        z1_vars.append(z1)

        psi = sym(w_full @ a_cl - lam * y_full @ c_hat)
        b1 = w_full @ b_w
        b2 = w_full @ l_hat + lam * y_full
        lmi1 = cp.bmat([
            [2.0 * psi, b1, b2],
            [b1.T, -np.eye(q), np.zeros((q, m))],
            [b2.T, np.zeros((m, q)), -md.q_weight],
        ])
        lmi2 = cp.bmat([[-z_full, np.eye(n)], [np.eye(n), -w_full]])
        if gamma_cap is None:
            constraints.append(sym(lmi1) << -d1 * np.eye(n + q + m))
        else:
            t_i = cp.Variable(nonneg=True)
            t_vars.append(t_i)
            constraints.append(
                sym(lmi1) << -(d1 + t_i) * np.eye(n + q + m)
            )
        constraints.append(sym(lmi2) << -d2 * np.eye(2 * n))
        constraints.append(w_full >> sdp.margin_w * np.eye(n))
        total = total + md.multiplicity * cp.trace(z_full)

    if gamma_cap is None:
        objective = cp.Minimize(total)
    else:
        constraints.append(total <= gamma_cap)
        objective = cp.Maximize(
            sum(md.multiplicity * t
                for md, t in zip(sdp.modes, t_vars))
        )
    problem = cp.Problem(objective, constraints)
    return problem, {"w1": w1_vars, "z1": z1_vars, "w2": w2, "z2": z2,
                     "y2": y2}


def _extract_solution(sdp: SdpModel, variables: dict,
                      status: str) -> SdpSolution:
    node = sdp.modes[0].node
    m = node.c_hat.shape[0]
    k = node.a_hat.shape[0] - m
    w2 = symmetrize(np.atleast_2d(np.asarray(variables["w2"].value, dtype=float)))
    z2 = symmetrize(np.atleast_2d(np.asarray(variables["z2"].value, dtype=float)))
    if sdp.phi_fixed_zero:
        y2 = np.zeros((m, m))
    else:
        y2 = np.atleast_2d(np.asarray(variables["y2"].value, dtype=float))
    w1_blocks, z1_blocks = [], []
    for w1, z1 in zip(variables["w1"], variables["z1"]):
        if k > 0:
            w1_blocks.append(symmetrize(np.atleast_2d(np.asarray(w1.value))))
            z1_blocks.append(symmetrize(np.atleast_2d(np.asarray(z1.value))))
        else:
            w1_blocks.append(np.zeros((0, 0)))
            z1_blocks.append(np.zeros((0, 0)))
    gamma = sum(
        md.multiplicity * (np.trace(z1_blocks[i]) + np.trace(z2))
        for i, md in enumerate(sdp.modes)
    )
    return SdpSolution(
        w1_blocks=tuple(w1_blocks),
        w2=w2,
        y2=y2,
        z1_blocks=tuple(z1_blocks),
        z2=z2,
        gamma_hat=float(gamma),
        status=status,
        max_lmi_eigenvalue=np.nan,  # filled by the strictness check
        phi_fixed_zero=sdp.phi_fixed_zero,
    )


def check_strictness(modes: tuple[ModeProblem, ...], r_weight: np.ndarray,
                     sol: SdpSolution, feas_tol: float = FEASIBILITY_TOL):
    """Independent eigenvalue check of every constraint at the solution.

    Returns (ok, lmi1_margins, lmi2_margins, w_min_eigs, worst) where each
    margins entry is (max eigenvalue, required upper bound); required is
    -feas_tol * max(1, ||block||_2).
    """
    lmi1_margins, lmi2_margins, w_mins = [], [], []
    ok = True
    worst = -np.inf
    y_full = sol.y_full()
    for i, md in enumerate(modes):
        w_full = sol.w_full(i)
        z_full = sol.z_full(i)
        for block, store in ((lmi1_block(md, r_weight, w_full, y_full),
                              lmi1_margins),
                             (lmi2_block(w_full, z_full), lmi2_margins)):
            top = float(np.linalg.eigvalsh(block)[-1])
            bound = -feas_tol * max(1.0, float(np.linalg.norm(block, 2)))
            store.append((top, bound))
            ok = ok and top <= bound
            worst = max(worst, top)
        w_min = float(np.linalg.eigvalsh(w_full)[0])
        w_mins.append(w_min)
        ok = ok and w_min > 0.0
    return ok, tuple(lmi1_margins), tuple(lmi2_margins), tuple(w_mins), worst


def solve_sdp(sdp: SdpModel, solver: str = "CLARABEL") -> SdpSolution:
    """Run both solve stages and certify strictness outside the solver.

    Stage one minimises the trace bound; stage two holds the bound at its
    optimum (within relative slack 1e-6) and maximises the summed LMI
    strictness margins, which selects a useful coupling gain whenever the
    bound alone is degenerate in Y2. If the independent strictness check
    fails, the program is rebuilt once with margins rescaled from the
    actual solution blocks and re-solved; the whole rule is deterministic.
    """
    import cvxpy as cp

    def _solve(problem, model: SdpModel, what: str) -> None:
        try:
            problem.solve(solver=solver)
        except cp.error.SolverError as exc:
            raise SynthesisError(f"SDP solver failed in {what}: {exc}") from exc
        if problem.status not in ("optimal", "optimal_inaccurate"):
            point = initial_feasible_point(model.modes)
            k = point["w1"].shape[0]
            w0 = (scipy.linalg.block_diag(point["w1"], point["w2"])
                  if k > 0 else point["w2"])
            y0 = np.vstack([np.zeros((k, point["y2"].shape[1])), point["y2"]])
            tops = [
                float(np.linalg.eigvalsh(
                    lmi1_block(md, model.r_weight, w0, y0))[-1])
                for md in model.modes
            ]
            worst = int(np.argmax(tops))
            raise SynthesisError(
                f"SDP {what} not solved to optimality (status "
                f"{problem.status}); most violated constraint at the "
                f"decoupled point: mode {worst} (eigenvalue "
                f"{model.modes[worst].eigenvalue:.6g}, max LMI eig "
                f"{tops[worst]:.3e})"
            )

    def _run(model: SdpModel) -> SdpSolution:
        problem, variables = _assemble_program(model, gamma_cap=None)
        _solve(problem, model, "stage 1")
        sol = _extract_solution(model, variables, str(problem.status))
        if model.phi_fixed_zero:
            return sol
        # relative slack on the bound keeps stage 2 well conditioned; the
        # certified bound grows by at most one part in 1e6
        cap = sol.gamma_hat * (1.0 + 1e-6) + 1e-9
        problem2, variables2 = _assemble_program(model, gamma_cap=cap)
        _solve(problem2, model, "stage 2")
        return _extract_solution(model, variables2, str(problem2.status))

    sol = _run(sdp)
    ok, m1, m2, wmin, worst = check_strictness(sdp.modes, sdp.r_weight, sol,
                                               sdp.feas_tol)
    if not ok:
        scale1 = np.array([max(1.0, abs(b) / sdp.feas_tol) for _, b in m1])
        scale2 = np.array([max(1.0, abs(b) / sdp.feas_tol) for _, b in m2])
        rebuilt = build_sdp(
            sdp.modes, sdp.r_weight, feas_tol=sdp.feas_tol,
            fix_phi_zero=sdp.phi_fixed_zero,
            margin_scales=(scale1, scale2),
        )
        sol = _run(rebuilt)
        ok, m1, m2, wmin, worst = check_strictness(
            sdp.modes, sdp.r_weight, sol, sdp.feas_tol
        )
        if not ok:
            raise VerificationError(
                f"LMI strictness could not be certified (worst max "
                f"eigenvalue {worst:.3e})"
            )
    slack = sum(
        md.multiplicity * float(np.trace(np.linalg.inv(sol.w_full(i))))
        for i, md in enumerate(sdp.modes)
    )
    if slack > sol.gamma_hat + 1e-9 * max(1.0, sol.gamma_hat):
        raise VerificationError(
            f"slack guarantee violated: sum trace(W^-1) = {slack:.9g} "
            f"exceeds the bound {sol.gamma_hat:.9g}"
        )
    return replace(sol, max_lmi_eigenvalue=float(worst))


def recover_phi(sol: SdpSolution, l2: np.ndarray) -> np.ndarray:
    """Coupling gain Phi = l2^-1 W2^-1 Y2, with the round trip re-checked."""
    if abs(np.linalg.det(sol.w2)) == 0.0:
        raise SynthesisError("W2 is singular; cannot recover Phi")
    phi = np.linalg.solve(l2, np.linalg.solve(sol.w2, sol.y2))
    rebuilt = sol.w2 @ l2 @ phi
    dev = np.linalg.norm(rebuilt - sol.y2)
    if dev > 1e-9 * max(1.0, np.linalg.norm(sol.y2)):
        raise VerificationError(
            f"Phi recovery inconsistent (||W2 l2 Phi - Y2|| = {dev:.3e})"
        )
    return phi


def achieved_cost(modes: tuple[ModeProblem, ...], r_weight: np.ndarray,
                  phi: np.ndarray, lyapunov_tol: float = 1e-10
                  ) -> tuple[float, tuple[float, ...]]:
    """Cost actually delivered by (L, Phi): per-mode closed-loop traces.

    For each mode the certified inequality is read at equality, i.e. the
    per-mode Lyapunov equation with the coupled gain L (I + lambda Phi) is
    solved exactly. Raises if any mode matrix fails to be Hurwitz.
    """
    node = modes[0].node
    a_cl = node.a_hat - node.l_hat @ node.c_hat
    noise = node.bbar_hat @ np.linalg.solve(r_weight, node.bbar_hat.T)
    total = 0.0
    traces = []
    for md in modes:
        f_i = a_cl - md.eigenvalue * node.l_hat @ phi @ node.c_hat
        hurwitz, alpha = is_hurwitz(f_i)
        if not hurwitz:
            raise SynthesisError(
                f"mode {md.index} (eigenvalue {md.eigenvalue:.6g}) is not "
                f"Hurwitz with this coupling (abscissa {alpha:.3e})"
            )
        gain_i = node.l_hat + md.eigenvalue * node.l_hat @ phi
        const = symmetrize(
            noise + gain_i @ np.linalg.solve(md.q_weight, gain_i.T)
        )
        s_i = solve_lyapunov(f_i, const, residual_tol=lyapunov_tol)
        tr = float(np.trace(s_i))
        traces.append(tr)
        total += md.multiplicity * tr
    return total, tuple(traces)


def _mode_union_error(a_err: np.ndarray, node: NodeObserver, phi: np.ndarray,
                      graph: GraphTopology) -> float:
    """Max matched distance between eig(A_err) and the per-mode union."""
    full = np.linalg.eigvals(a_err)
    a_cl = node.a_hat - node.l_hat @ node.c_hat
    coupling = node.l_hat @ phi @ node.c_hat
    union = np.concatenate([
        np.linalg.eigvals(a_cl - lam * coupling) for lam in graph.eigvals
    ])
    cost = np.abs(full[:, None] - union[None, :])
    rows, cols = linear_sum_assignment(cost)
    return float(cost[rows, cols].max())


def verify_design(design: ObserverDesign,
                  graph: GraphTopology | None = None,
                  feas_tol: float = FEASIBILITY_TOL,
                  chain_slack: float = CHAIN_SLACK,
                  mode_union_tol: float = MODE_UNION_TOL) -> DesignCertificate:
    """Recompute every certificate of a design from scratch (diagnostic)."""
    graph = design.graph if graph is None else graph
    node = design.node
    failures: list[str] = []

    hurwitz, alpha = is_hurwitz(design.a_err)
    if not hurwitz:
        failures.append(f"networked error matrix not Hurwitz (abscissa {alpha:.3e})")

    a_cl = node.a_hat - node.l_hat @ node.c_hat
    per_mode_abs = tuple(
        float(np.max(np.linalg.eigvals(
            a_cl - md.eigenvalue * node.l_hat @ design.phi @ node.c_hat
        ).real))
        for md in design.modes
    )

    union_err = _mode_union_error(design.a_err, node, design.phi, graph)
    union_tol = mode_union_tol * max(1.0, np.linalg.norm(design.a_err, 2))
    union_ok = union_err <= union_tol
    if not union_ok:
        failures.append(f"mode-union identity error {union_err:.3e} > {union_tol:.3e}")

    lmi_ok, m1, m2, wmin, _ = check_strictness(
        design.modes, design.weights.R, design.sdp, feas_tol
    )
    if not lmi_ok:
        failures.append("an LMI block is not strictly negative definite")

    chain_ok = (design.sum_mode_optima <= design.j_achieved + chain_slack
                and design.j_achieved <= design.gamma_hat + chain_slack)
    if not chain_ok:
        failures.append(
            f"cost chain violated: {design.sum_mode_optima:.9g} <= "
            f"{design.j_achieved:.9g} <= {design.gamma_hat:.9g} (+{chain_slack:g})"
        )

    return DesignCertificate(
        a_err_abscissa=alpha,
        a_err_hurwitz=hurwitz,
        per_mode_abscissas=per_mode_abs,
        mode_union_error=union_err,
        mode_union_ok=union_ok,
        lmi1_margins=m1,
        lmi2_margins=m2,
        w_min_eigs=wmin,
        lmi_ok=lmi_ok,
        sum_mode_optima=design.sum_mode_optima,
        j_achieved=design.j_achieved,
        gamma_hat=design.gamma_hat,
        chain_ok=chain_ok,
        passed=not failures,
        failures=tuple(failures),
    )


def synthesize_observer(model: AgentModel, weights: MeeWeights,
                        graph: GraphTopology,
                        feas_tol: float = FEASIBILITY_TOL,
                        riccati_tol: float = 1e-8,
                        chain_slack: float = CHAIN_SLACK,
                        mode_union_tol: float = MODE_UNION_TOL,
                        lyapunov_tol: float = 1e-10,
                        solver: str = "CLARABEL") -> ObserverDesign:
    """Full synthesis: node observer, mode decoupling, SDP, verification.

    Raises SynthesisError when a design step fails and VerificationError
    when the completed design does not pass its certificate checks. When
    Q2 = 0 or the graph has no edges the coupling gain is fixed at zero
    (the decoupled optimum) instead of being left to solver round-off.
    """
    _require_weights_match(model, weights)
    node = design_node_observer(model, weights, residual_tol=riccati_tol)
    modes = decouple_modes(node, weights, graph)

    decoupled = (np.linalg.norm(weights.Q2) == 0.0
                 or all(md.eigenvalue == 0.0 for md in modes))
    sdp = build_sdp(modes, weights.R, feas_tol=feas_tol,
                    fix_phi_zero=decoupled)
    sol = solve_sdp(sdp, solver=solver)
    phi = recover_phi(sol, node.l2)

    j_ach, _ = achieved_cost(modes, weights.R, phi, lyapunov_tol=lyapunov_tol)
    optima = tuple(
        float(np.trace(per_mode_optimum(md, weights.R))) for md in modes
    )
    sum_optima = float(sum(md.multiplicity * tr
                           for md, tr in zip(modes, optima)))
    a_err, g_y = assemble_observer(node, phi, graph)

    design = ObserverDesign(
        model=model,
        weights=weights,
        graph=graph,
        node=node,
        modes=modes,
        sdp=sol,
        phi=phi,
        gamma_hat=sol.gamma_hat,
        j_achieved=j_ach,
        per_mode_optima=optima,
        sum_mode_optima=sum_optima,
        gain_original=node.gain_original,
        gain_hat=node.l_hat,
        a_err=a_err,
        output_gain=g_y,
        certificate=None,
    )
    certificate = verify_design(design, graph, feas_tol=feas_tol,
                                chain_slack=chain_slack,
                                mode_union_tol=mode_union_tol)
    design = replace(design, certificate=certificate)
    if not certificate.passed:
        raise VerificationError(
            "design failed verification: " + "; ".join(certificate.failures)
        )
    return design
