"""Core matrix computations: Kronecker products, Riccati and Lyapunov
solvers, and stability tests.

Both Riccati solvers reduce to the stabilizing solution of

    F' X + X F - X G X + H = 0,    G = G' >= 0,  H = H' >= 0,

computed from the stable invariant subspace of the 2n x 2n Hamiltonian
matrix [[F, -G], [-H, -F']] via an ordered real Schur decomposition, with a
Newton-Kleinman polish when the subspace extraction is ill conditioned or
the residual is above tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import SynthesisError, VerificationError

#: Relative Frobenius residual accepted for a Riccati solution.
RICCATI_RESIDUAL_TOL = 1e-8
#: Relative Frobenius residual accepted for a Lyapunov solution.
LYAPUNOV_RESIDUAL_TOL = 1e-10
#: Relative rank tolerance of the PBH tests (scaled by the largest singular value).
PBH_RANK_RTOL = 1e-9
#: Condition number of the invariant-subspace basis beyond which the
#: Newton-Kleinman refinement kicks in.
SCHUR_COND_LIMIT = 1e8


@dataclass(frozen=True)
class AgentModel:
    """One agent's LTI data: x' = Ax + Bu + Bbar*d, y = Cx + n.

    B may be None for pure estimation problems. C must have full row rank
    (m <= n) so the output-normalising rotation exists downstream.
    """

    A: np.ndarray
    Bbar: np.ndarray
    C: np.ndarray
    B: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "A", _as_matrix(self.A))
        object.__setattr__(self, "Bbar", _as_matrix(self.Bbar))
        object.__setattr__(self, "C", _as_matrix(self.C))
        if self.B is not None:
            object.__setattr__(self, "B", _as_matrix(self.B))
        n = self.A.shape[0]
        if self.A.shape != (n, n):
            raise ValueError(f"A must be square, got {self.A.shape}")
        if self.Bbar.shape[0] != n:
            raise ValueError(f"Bbar must have {n} rows, got {self.Bbar.shape}")
        if self.C.shape[1] != n:
            raise ValueError(f"C must have {n} columns, got {self.C.shape}")
        if self.B is not None and self.B.shape[0] != n:
            raise ValueError(f"B must have {n} rows, got {self.B.shape}")
        m = self.C.shape[0]
        if m > n:
            raise ValueError(f"C has more rows ({m}) than states ({n})")
        sv = np.linalg.svd(self.C, compute_uv=False)
        if sv[-1] <= 1e-9 * sv[0]:
            raise ValueError("C is rank deficient; full row rank is required")

    @property
    def n_states(self) -> int:
        return self.A.shape[0]

    @property
    def n_inputs(self) -> int:
        return 0 if self.B is None else self.B.shape[1]

    @property
    def n_disturbances(self) -> int:
        return self.Bbar.shape[1]

    @property
    def n_outputs(self) -> int:
        return self.C.shape[0]


def _as_matrix(value) -> np.ndarray:
    arr = np.atleast_2d(np.asarray(value, dtype=float))
    if arr.ndim != 2:
        raise ValueError(f"expected a matrix, got array of shape {arr.shape}")
    return arr


def symmetrize(mat: np.ndarray) -> np.ndarray:
    return 0.5 * (mat + mat.T)


def kron(a, b) -> np.ndarray:
    """Kronecker product: the block matrix [a_ij * b]."""
    return np.kron(_as_matrix(a), _as_matrix(b))


def sqrtm_psd(mat: np.ndarray, clip_tol: float = 1e-12) -> np.ndarray:
    """Symmetric square root of a PSD matrix (tiny negative eigenvalues clipped)."""
    w, v = np.linalg.eigh(symmetrize(np.asarray(mat, dtype=float)))
    scale = max(1.0, abs(w[-1]))
    if w[0] < -clip_tol * scale:
        raise ValueError(f"matrix is not positive semidefinite (min eig {w[0]:.3e})")
    w = np.clip(w, 0.0, None)
    return symmetrize(v @ np.diag(np.sqrt(w)) @ v.T)


def spectral_abscissa(mat: np.ndarray) -> float:
    """Largest real part over the eigenvalues of `mat`."""
    return float(np.max(np.linalg.eigvals(np.asarray(mat, dtype=float)).real))


def is_hurwitz(mat: np.ndarray) -> tuple[bool, float]:
    """Return (all eigenvalues strictly in the open left half plane, abscissa)."""
    alpha = spectral_abscissa(mat)
    return alpha < 0.0, alpha


def _check_symmetric(mat: np.ndarray, name: str, rtol: float = 1e-10) -> np.ndarray:
    mat = _as_matrix(mat)
    if mat.shape[0] != mat.shape[1]:
        raise ValueError(f"{name} must be square, got {mat.shape}")
    dev = np.linalg.norm(mat - mat.T)
    if dev > rtol * max(1.0, np.linalg.norm(mat)):
        raise ValueError(f"{name} is not symmetric (asymmetry {dev:.3e})")
    return symmetrize(mat)


def _check_spd(mat: np.ndarray, name: str) -> np.ndarray:
    mat = _check_symmetric(mat, name)
    w = np.linalg.eigvalsh(mat)
    if w[0] <= 0.0:
        raise SynthesisError(f"{name} must be positive definite (min eig {w[0]:.3e})")
    return mat


def _check_psd(mat: np.ndarray, name: str) -> np.ndarray:
    mat = _check_symmetric(mat, name)
    w = np.linalg.eigvalsh(mat)
    if w[0] < -1e-10 * max(1.0, abs(w[-1])):
        raise SynthesisError(f"{name} must be positive semidefinite (min eig {w[0]:.3e})")
    return mat


def _pbh_defect(a: np.ndarray, b: np.ndarray, modes: np.ndarray,
                rtol: float) -> complex | None:
    """First eigenvalue mu in `modes` where [mu*I - a, b] loses row rank."""
    n = a.shape[0]
    for mu in modes:
        pencil = np.hstack([mu * np.eye(n) - a, b]).astype(complex)
        sv = np.linalg.svd(pencil, compute_uv=False)
        if sv[-1] <= rtol * sv[0]:
            return complex(mu)
    return None


def check_stabilizable(a: np.ndarray, b: np.ndarray,
                       rtol: float = PBH_RANK_RTOL) -> None:
    """PBH test over the closed right half plane; raises on failure."""
    eigs = np.linalg.eigvals(a)
    bad = _pbh_defect(a, b, eigs[eigs.real >= -1e-12], rtol)
    if bad is not None:
        raise SynthesisError(
            f"pair is not stabilizable: PBH rank defect at eigenvalue {bad:.6g}"
        )


def check_detectable(a: np.ndarray, c: np.ndarray,
                     rtol: float = PBH_RANK_RTOL) -> None:
    """Detectability of (a, c) via stabilizability of the transposed pair."""
    try:
        check_stabilizable(a.T, c.T, rtol)
    except SynthesisError:
        eigs = np.linalg.eigvals(a)
        bad = _pbh_defect(a.T, c.T, eigs[eigs.real >= -1e-12].conj(), rtol)
        raise SynthesisError(
            f"pair is not detectable: PBH rank defect at eigenvalue {bad:.6g}"
        ) from None


def check_controllable(a: np.ndarray, b: np.ndarray,
                       rtol: float = PBH_RANK_RTOL) -> None:
    """PBH test over all eigenvalues; raises on failure."""
    bad = _pbh_defect(a, b, np.linalg.eigvals(a), rtol)
    if bad is not None:
        raise SynthesisError(
            f"pair is not controllable: PBH rank defect at eigenvalue {bad:.6g}"
        )


def check_observable(a: np.ndarray, c: np.ndarray,
                     rtol: float = PBH_RANK_RTOL) -> None:
    bad = _pbh_defect(a.T, c.T, np.linalg.eigvals(a).conj(), rtol)
    if bad is not None:
        raise SynthesisError(
            f"pair is not observable: PBH rank defect at eigenvalue {bad:.6g}"
        )


def _riccati_residual(f, g, h, x) -> float:
    return float(np.linalg.norm(f.T @ x + x @ f - x @ g @ x + h))


def _newton_kleinman(f, g, h, x0, tol, max_iter=25):
    """Quadratically convergent polish of a stabilizing Riccati iterate."""
    x = symmetrize(x0)
    best = x
    best_res = _riccati_residual(f, g, h, x)
    for _ in range(max_iter):
        closed = f - g @ x
        if spectral_abscissa(closed) >= 0.0:
            break
        rhs = h + x @ g @ x
        x = symmetrize(scipy.linalg.solve_continuous_lyapunov(closed.T, -rhs))
        res = _riccati_residual(f, g, h, x)
        if res < best_res:
            best, best_res = x, res
        if res <= tol:
            break
    return best, best_res


def _solve_riccati_fgh(f, g, h, residual_tol, what):
    """Stabilizing solution of F'X + XF - XGX + H = 0."""
    n = f.shape[0]
    ham = np.block([[f, -g], [-h, -f.T]])
    try:
        _, z, sdim = scipy.linalg.schur(ham, sort="lhp")
    except Exception as exc:  # LinAlgError or convergence failure
        raise SynthesisError(f"{what}: Schur decomposition failed ({exc})") from exc
    if sdim != n:
        raise SynthesisError(
            f"{what}: Hamiltonian has {sdim} stable eigenvalues, expected {n} "
            "(eigenvalues on the imaginary axis?)"
        )
    u1 = z[:n, :n]
    u2 = z[n:, :n]
    cond_u1 = np.linalg.cond(u1)
    x = symmetrize(np.linalg.solve(u1.T, u2.T).T)

    tol = residual_tol * max(1.0, np.linalg.norm(x))
    res = _riccati_residual(f, g, h, x)
    if cond_u1 > SCHUR_COND_LIMIT or res > tol:
        x, res = _newton_kleinman(f, g, h, x, tol)
        tol = residual_tol * max(1.0, np.linalg.norm(x))
    if res > tol:
        raise SynthesisError(
            f"{what}: residual {res:.3e} exceeds tolerance {tol:.3e} "
            f"(subspace condition {cond_u1:.3e})"
        )
    return x


def solve_care(a, b, q, r, residual_tol: float = RICCATI_RESIDUAL_TOL) -> np.ndarray:
    """Stabilizing solution P of A'P + PA - P B R^-1 B' P + Q = 0.

    Requires (A, B) stabilizable, Q = Q' >= 0, R = R' > 0 and
    (A, Q^(1/2)) detectable. The closed loop A - B R^-1 B' P is verified
    Hurwitz and the relative residual is certified against `residual_tol`.
    """
    a = _as_matrix(a)
    b = _as_matrix(b)
    q = _check_psd(q, "state weight Q")
    r = _check_spd(r, "input weight R")
    check_stabilizable(a, b)
    check_detectable(a, sqrtm_psd(q))
    g = b @ np.linalg.solve(r, b.T)
    p = _solve_riccati_fgh(a, symmetrize(g), q, residual_tol, "CARE")
    hurwitz, alpha = is_hurwitz(a - g @ p)
    if not hurwitz:
        raise SynthesisError(f"CARE closed loop not Hurwitz (abscissa {alpha:.3e})")
    return p


def solve_dual_are(a, bbar, c, q, r,
                   residual_tol: float = RICCATI_RESIDUAL_TOL
                   ) -> tuple[np.ndarray, np.ndarray]:
    """Stabilizing solution of A S + S A' + Bbar R^-1 Bbar' - S C' Q C S = 0.

    Returns (S, L) with the observer gain L = S C' Q; A - L C is verified
    Hurwitz. Requires (A, C) observable and (A, Bbar) controllable.
    """
    a = _as_matrix(a)
    bbar = _as_matrix(bbar)
    c = _as_matrix(c)
    q = _check_spd(q, "output weight Q")
    r = _check_spd(r, "disturbance weight R")
    check_observable(a, c)
    check_controllable(a, bbar)
    g = c.T @ q @ c
    h = bbar @ np.linalg.solve(r, bbar.T)
    s = _solve_riccati_fgh(a.T, symmetrize(g), symmetrize(h), residual_tol,
                           "dual ARE")
    gain = s @ c.T @ q
    hurwitz, alpha = is_hurwitz(a - gain @ c)
    if not hurwitz:
        raise SynthesisError(
            f"dual ARE observer loop not Hurwitz (abscissa {alpha:.3e})"
        )
    return s, gain


def solve_lyapunov(f, w, residual_tol: float = LYAPUNOV_RESIDUAL_TOL) -> np.ndarray:
    """Unique solution S of F S + S F' + W = 0 for Hurwitz F and W = W'.

    One or two steps of iterative refinement are applied when the direct
    Bartels-Stewart solution misses the residual tolerance.
    """
    f = _as_matrix(f)
    w = _check_symmetric(w, "Lyapunov constant term W")
    hurwitz, alpha = is_hurwitz(f)
    if not hurwitz:
        raise SynthesisError(
            f"Lyapunov equation needs Hurwitz F (abscissa {alpha:.3e})"
        )
    s = symmetrize(scipy.linalg.solve_continuous_lyapunov(f, -w))
    for _ in range(3):
        residual = f @ s + s @ f.T + w
        res = np.linalg.norm(residual)
        if res <= residual_tol * max(1.0, np.linalg.norm(s)):
            return s
        s = symmetrize(s + scipy.linalg.solve_continuous_lyapunov(f, -residual))
    res = np.linalg.norm(f @ s + s @ f.T + w)
    if res > residual_tol * max(1.0, np.linalg.norm(s)):
        raise VerificationError(
            f"Lyapunov residual {res:.3e} exceeds tolerance after refinement"
        )
    return s
