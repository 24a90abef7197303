"""Exact reference solver: direct solve of the monolithic saddle-point system.

Provides ground-truth trajectories and multipliers for convergence and
contraction tests of the iterative solver.  Intended for small and medium
instances only; the dimension cap guards against accidental huge solves.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .discretization import DiscreteSystem, constraint_residual

DEFAULT_DIMENSION_CAP = 200_000
_DENSE_LIMIT = 5_000


@dataclass(frozen=True)
class KktSolution:
    Y_star: np.ndarray
    U_star: np.ndarray
    lambda_star: np.ndarray
    stationarity_residual: float
    feasibility_residual: float


def constraint_blocks(sys: DiscreteSystem) -> tuple[sp.spmatrix, sp.spmatrix]:
    """Assembled block constraint matrices (state part, control part)."""
    M = sys.grid.M
    eye = sp.identity(M, format="csr")
    sub = sp.eye(M, M, k=-1, format="csr")
    state_part = sp.kron(eye, sys.step_plus.mat) - sp.kron(sub, sys.step_minus.mat)
    control_part = sp.kron(eye, -sys.grid.tau * sys.mass.mat)
    return state_part.tocsr(), control_part.tocsr()


def _solve_reduced(sys: DiscreteSystem, alpha: float):
    """Direct solve by block elimination instead of factoring the full system.

    The control rows give U_m = -lambda_m / alpha outright, and the constraint
    rows then express lambda_m through the states.  What remains is a symmetric
    positive definite block-tridiagonal system in the states alone, solved by a
    block Cholesky sweep with dense per-step blocks.  Memory stays proportional
    to M times one dense block, which keeps mid-size instances tractable.
    """
    ndof, M = sys.ndof, sys.grid.M
    tau = sys.grid.tau
    rho = alpha / tau
    cp, cm = sys.step_plus.mat.tocsc(), sys.step_minus.mat.tocsc()
    mass_lu = spla.splu(sys.mass.mat.tocsc())

    g_plus = mass_lu.solve(cp.toarray())
    g_minus = mass_lu.solve(cm.toarray())
    p_pp = cp.T @ g_plus
    p_mm = cm.T @ g_minus
    off = -rho * (cp.T @ g_minus)  # coupling block between steps m-1 and m

    ainv_f = mass_lu.solve(sys.rhs)
    r = (sys.kappa * tau) * sys.desired_loads + rho * (cp.T @ ainv_f)
    r[:, :-1] -= rho * (cm.T @ ainv_f[:, 1:])

    mass_dense = sys.mass.toarray()
    factors = []
    y_fwd = np.empty((ndof, M))
    schur = None
    for m in range(M):
        kappa = 0.5 if m == M - 1 else 1.0
        diag = kappa * tau * mass_dense + rho * p_pp
        if m < M - 1:
            diag = diag + rho * p_mm
        rhs_m = r[:, m].copy()
        if m > 0:
            prev = factors[-1]
            diag -= off @ scipy.linalg.cho_solve(prev, off.T)
            rhs_m -= off @ scipy.linalg.cho_solve(prev, y_fwd[:, m - 1])
        try:
            schur = scipy.linalg.cho_factor(diag, lower=True)
        except scipy.linalg.LinAlgError as exc:
            raise RuntimeError(
                "reduced state system lost positive definiteness; this "
                "signals a build bug"
            ) from exc
        factors.append(schur)
        y_fwd[:, m] = rhs_m

    Y = np.empty((ndof, M))
    Y[:, M - 1] = scipy.linalg.cho_solve(factors[M - 1], y_fwd[:, M - 1])
    for m in range(M - 2, -1, -1):
        Y[:, m] = scipy.linalg.cho_solve(factors[m], y_fwd[:, m] - off.T @ Y[:, m + 1])

    lam_rhs = sys.rhs - cp @ Y
    lam_rhs[:, 1:] += cm @ Y[:, :-1]
    lam = rho * mass_lu.solve(lam_rhs)
    U = -lam / alpha
    return Y, U, lam


def solve_kkt(
    sys: DiscreteSystem, alpha: float, dimension_cap: int = DEFAULT_DIMENSION_CAP
) -> KktSolution:
    """Solve the stationarity system of the equality-constrained QP directly.

    Unknown ordering is (U stacked, Y stacked, lambda stacked); the system is
    symmetric indefinite and solved with a direct factorization (dense below
    a small threshold).
    """
    ndof, M = sys.ndof, sys.grid.M
    tau = sys.grid.tau
    dim = 3 * ndof * M
    if dim > dimension_cap:
        raise ValueError(f"KKT dimension {dim} exceeds cap {dimension_cap}")

    state_part, control_part = constraint_blocks(sys)
    C = sp.hstack([control_part, state_part], format="csr")
    Qu = sp.kron(sp.identity(M), alpha * tau * sys.mass.mat)
    Qy = sp.kron(sp.diags(sys.kappa * tau), sys.mass.mat)
    Q = sp.block_diag([Qu, Qy], format="csr")

    b = np.concatenate([np.zeros(ndof * M), (sys.desired_loads * (sys.kappa * tau)).T.ravel()])
    fvec = sys.rhs.T.ravel()

    if dim < _DENSE_LIMIT:
        kkt = sp.bmat([[Q, -C.T], [C, None]], format="csc")
        rhs = np.concatenate([b, fvec])
        try:
            sol = scipy.linalg.solve(kkt.toarray(), rhs)
        except scipy.linalg.LinAlgError as exc:
            raise RuntimeError(
                "KKT system is singular; the constraint blocks should have full "
                "column rank, so this signals a build bug"
            ) from exc
        nz = 2 * ndof * M
        z, lam_flat = sol[:nz], sol[nz:]
        U = z[: ndof * M].reshape(M, ndof).T.copy()
        Y = z[ndof * M :].reshape(M, ndof).T.copy()
        lam = lam_flat.reshape(M, ndof).T.copy()
    else:
        Y, U, lam = _solve_reduced(sys, alpha)
        z = np.concatenate([U.T.ravel(), Y.T.ravel()])
        lam_flat = lam.T.ravel()

    stat = np.linalg.norm(Q @ z - b - C.T @ lam_flat) / (1.0 + np.linalg.norm(b))
    feas = np.linalg.norm(constraint_residual(sys, Y, U)) / (1.0 + np.linalg.norm(fvec))
    return KktSolution(
        Y_star=Y,
        U_star=U,
        lambda_star=lam,
        stationarity_residual=float(stat),
        feasibility_residual=float(feas),
    )
