"""Preconditioned conjugate gradients with Lanczos spectrum estimates.

The PCG recurrence coefficients assemble the Lanczos tridiagonal of the
preconditioned operator; its extreme Ritz values give the reported eigenvalue
and condition number estimates.  A dense generalized eigensolver serves as the
spectrum oracle on small systems.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp


@dataclass
class SolveReport:
    """Outcome of one preconditioned solve."""

    iterations: int
    residual_history: np.ndarray
    lambda_min: float | None
    lambda_max: float | None
    kappa: float | None
    converged: bool
    solution: np.ndarray
    pD: float | None = None


def _ritz_extremes(alphas, betas):
    diag = np.empty(len(alphas))
    diag[0] = 1.0 / alphas[0]
    for j in range(1, len(alphas)):
        diag[j] = 1.0 / alphas[j] + betas[j - 1] / alphas[j - 1]
    if len(alphas) == 1:
        return diag[0], diag[0]
    off = np.array([np.sqrt(betas[j]) / alphas[j] for j in range(len(alphas) - 1)])
    ritz = scipy.linalg.eigvalsh_tridiagonal(diag, off)
    return float(ritz[0]), float(ritz[-1])


def pcg(
    A: sp.spmatrix,
    M,
    b: np.ndarray,
    tol: float = 1e-6,
    maxit: int = 1000,
    callback=None,
) -> SolveReport:
    """Solve A x = b with the preconditioner M (an object with ``apply``).

    Stops when the preconditioned residual norm sqrt(r' M^{-1} r) falls below
    ``tol`` times its initial value.  Non-convergence returns a partial report;
    a non-positive curvature or preconditioned product raises, signalling a
    non-SPD operator.
    """
    b = np.asarray(b, float)
    if not np.all(np.isfinite(b)):
        raise ValueError("right-hand side must be finite")
    x = np.zeros_like(b)
    if not np.any(b):
        return SolveReport(
            iterations=0,
            residual_history=np.array([0.0]),
            lambda_min=None,
            lambda_max=None,
            kappa=None,
            converged=True,
            solution=x,
        )
    r = b.copy()
    z = M.apply(r)
    rz = float(r @ z)
    if rz <= 0:
        raise ValueError("preconditioner is not positive definite")
    history = [np.sqrt(rz)]
    p = z.copy()
    alphas: list[float] = []
    betas: list[float] = []
    converged = False
    iterations = 0
    for it in range(1, maxit + 1):
        Ap = A @ p
        pAp = float(p @ Ap)
        if pAp <= 0:
            raise ValueError("matrix is not positive definite (nonpositive curvature)")
        alpha = rz / pAp
        x += alpha * p
        r -= alpha * Ap
        z = M.apply(r)
        rz_new = float(r @ z)
        alphas.append(alpha)
        history.append(np.sqrt(max(rz_new, 0.0)))
        iterations = it
        if callback is not None:
            callback(x.copy())
        if history[-1] <= tol * history[0]:
            converged = True
            break
        if rz_new <= 0:
            # at a tiny residual this is roundoff stagnation, not a non-SPD signal
            if history[-1] <= 1e-8 * history[0]:
                break
            raise ValueError("preconditioner is not positive definite")
        beta = rz_new / rz
        betas.append(beta)
        rz = rz_new
        p = z + beta * p
    lam_min, lam_max = _ritz_extremes(alphas, betas[: len(alphas) - 1])
    return SolveReport(
        iterations=iterations,
        residual_history=np.array(history),
        lambda_min=lam_min,
        lambda_max=lam_max,
        kappa=lam_max / lam_min,
        converged=converged,
        solution=x,
    )


def dense_spectrum_oracle(A: sp.spmatrix, M, size_guard: int = 2000) -> np.ndarray:
    """Full spectrum of the preconditioned operator by dense factorization.

    Builds the dense preconditioner inverse column by column and solves the
    symmetric generalized problem; only sensible on small systems, hence the
    size guard.
    """
    n = A.shape[0]
    if n > size_guard:
        raise ValueError(f"system size {n} exceeds the oracle guard {size_guard}")
    dense_inv = np.empty((n, n))
    eye = np.eye(n)
    for j in range(n):
        dense_inv[:, j] = M.apply(eye[:, j])
    dense_inv = 0.5 * (dense_inv + dense_inv.T)
    values = scipy.linalg.eigh(
        A.toarray(), dense_inv, type=3, eigvals_only=True
    )
    return np.sort(values)
