"""Two-level additive Schwarz preconditioner.

Application sums exact local solves on the interior dofs of every overlapping
subdomain with one coarse solve through the coarse restriction operator.  All
factorizations happen at build time; ``apply`` is read-only afterwards and safe
to share between solver instances.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .coarse import CoarseSpace
from .fem import DofMap
from .partition import DomainPartition


class SchwarzPreconditioner:
    """Additive combination of local subdomain inverses and a coarse inverse."""

    def __init__(self, A: sp.spmatrix, partition: DomainPartition, coarse: CoarseSpace | None = None):
        A = A.tocsr()
        free = DofMap.free(partition.mesh)
        if A.shape[0] != len(free):
            raise ValueError("matrix must be indexed by the free nodes of the mesh")
        self.shape = A.shape
        self.coarse = coarse
        self.local_dofs = []
        self.local_lu = []
        for i, nodes in enumerate(partition.interior_nodes):
            idx = free.index[nodes]
            if np.any(idx < 0):
                raise RuntimeError(f"subdomain {i} local dofs leak onto the boundary")
            if idx.size == 0:
                continue
            try:
                lu = splu(A[idx][:, idx].tocsc())
            except RuntimeError as err:
                raise RuntimeError(f"local factorization failed on subdomain {i}") from err
            self.local_dofs.append(idx)
            self.local_lu.append(lu)
        if coarse is not None:
            A0 = np.asarray((coarse.R0 @ (A @ coarse.R0.T)).todense())
            try:
                self.coarse_factor = scipy.linalg.cho_factor(A0)
            except np.linalg.LinAlgError as err:
                raise RuntimeError(
                    "coarse matrix is not positive definite (dependent coarse rows?)"
                ) from err
        else:
            self.coarse_factor = None

    @property
    def two_level(self) -> bool:
        return self.coarse_factor is not None

    def apply(self, r: np.ndarray) -> np.ndarray:
        """z = sum_i R_i^T A_i^{-1} R_i r + R_0^T A_0^{-1} R_0 r."""
        r = np.asarray(r, float)
        z = np.zeros_like(r)
        for idx, lu in zip(self.local_dofs, self.local_lu):
            z[idx] += lu.solve(r[idx])
        if self.coarse_factor is not None:
            rc = np.asarray(self.coarse.R0 @ r).ravel()
            zc = scipy.linalg.cho_solve(self.coarse_factor, rc)
            z += np.asarray(self.coarse.R0.T @ zc).ravel()
        return z


def build_preconditioner(
    A: sp.spmatrix,
    partition: DomainPartition,
    coarse: CoarseSpace | None = None,
) -> SchwarzPreconditioner:
    """Factorize every local block and the coarse block of the preconditioner."""
    return SchwarzPreconditioner(A, partition, coarse)
