"""Per-subdomain generalized eigenproblems and the auxiliary spectral space.

Each nonoverlapping subdomain contributes the low modes of the pencil formed
by its local energy and the partition-of-unity weighted mass.  The mass side
is singular away from the overlap strips, so the pencil is solved in reversed
form, ``S x = mu * (A + shift) x``, where the tiny shift removes the at most
one-dimensional constant kernel of the energy on interior subdomains.  Finite
modes are the ``rank(S)`` largest ``mu``; their eigenvalues are reported as
Rayleigh quotients of the unshifted energy.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .fem import DofMap, assemble_stiffness, assemble_weighted_mass
from .mesh import CoefficientField, Mesh
from .partition import DomainPartition, PartitionOfUnity


@dataclass(frozen=True)
class SubdomainModes:
    """Eigen-data of one subdomain: local dofs, finite spectrum, selected modes."""

    dofs: DofMap
    eigenvalues: np.ndarray
    vectors: np.ndarray
    count: int

    @property
    def selected_eigenvalues(self) -> np.ndarray:
        return self.eigenvalues[: self.count]


@dataclass(frozen=True)
class AuxSpace:
    """Selected eigenvectors of every subdomain under a shared threshold."""

    threshold: float
    modes: list

    @property
    def counts(self) -> np.ndarray:
        return np.array([m.count for m in self.modes])

    def spectra_rows(self):
        """Rows (i, j, eigenvalue, selected) for the optional CSV dump."""
        for i, m in enumerate(self.modes):
            for j, lam in enumerate(m.eigenvalues):
                yield i, j, float(lam), j < m.count


def local_gevp(A_i: sp.spmatrix, S_i: sp.spmatrix, threshold: float):
    """Solve the local pencil and select eigenpairs under the threshold.

    Returns ``(eigenvalues, vectors, count)``: all finite eigenvalues in
    ascending order, the matching columns normalized to unit weighted mass,
    and the number selected (strictly below the threshold, floored at one).
    """
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    S_diag = np.asarray(S_i.diagonal())
    finite = int(np.count_nonzero(S_diag > 0))
    if finite == 0:
        raise ValueError("weighted mass form is identically zero on this subdomain")
    A_dense = A_i.toarray()
    S_dense = S_i.toarray()
    shift = 1e-12 * np.trace(A_dense)
    A_reg = A_dense + shift * np.eye(A_dense.shape[0])
    mu, vecs = scipy.linalg.eigh(S_dense, A_reg)
    order = np.argsort(mu)[::-1][:finite]
    mu = mu[order]
    vecs = vecs[:, order]
    if mu[-1] <= 0:
        raise np.linalg.LinAlgError("weighted mass rank below its structural rank")
    vecs = vecs / np.sqrt(mu)[None, :]
    lams = np.einsum("df,df->f", A_i @ vecs, vecs)
    resort = np.argsort(lams, kind="stable")
    lams = lams[resort]
    vecs = vecs[:, resort]
    count = max(int(np.count_nonzero(lams < threshold)), 1)
    return lams, vecs, count


def _subdomain_pencil(
    mesh: Mesh,
    rho: CoefficientField,
    tris: np.ndarray,
    nodes: np.ndarray,
    weight: np.ndarray,
):
    free = nodes[~mesh.boundary_mask[nodes]]
    dofs = DofMap.from_nodes(free, mesh.num_nodes)
    A_i = assemble_stiffness(mesh, rho, support=tris, dofs=dofs)
    S_i = assemble_weighted_mass(mesh, rho, weight, support=tris, dofs=dofs)
    return dofs, A_i, S_i


def build_aux_space(
    mesh: Mesh,
    rho: CoefficientField,
    partition: DomainPartition,
    pou: PartitionOfUnity,
    threshold: float,
) -> AuxSpace:
    """Solve the pencil on every nonoverlapping subdomain and collect modes.

    The mass weight is the aggregate squared-gradient of all partition-of-unity
    functions, restricted to the subdomain's triangles.
    """
    modes = []
    for i in range(partition.num_subdomains):
        dofs, A_i, S_i = _subdomain_pencil(
            mesh,
            rho,
            partition.subdomain_tris[i],
            partition.subdomain_nodes[i],
            pou.aggregate_grad_sq,
        )
        try:
            lams, vecs, count = local_gevp(A_i, S_i, threshold)
        except ValueError as err:
            raise ValueError(f"subdomain {i}: {err}") from err
        modes.append(
            SubdomainModes(dofs=dofs, eigenvalues=lams, vectors=vecs[:, :count], count=count)
        )
    return AuxSpace(threshold=threshold, modes=modes)


def galvis_modes(
    mesh: Mesh,
    rho: CoefficientField,
    partition: DomainPartition,
    pou: PartitionOfUnity,
    threshold: float,
) -> list:
    """Per-overlapping-subdomain modes of the energy against the own-gradient mass.

    Unlike the auxiliary space, the eigenproblem lives on the overlapping
    subdomain and weights the mass with that subdomain's squared gradient only.
    """
    modes = []
    for i in range(partition.num_subdomains):
        dofs, A_i, S_i = _subdomain_pencil(
            mesh,
            rho,
            partition.overlap_tris[i],
            partition.overlap_nodes[i],
            pou.grad_sq_vector(i),
        )
        try:
            lams, vecs, count = local_gevp(A_i, S_i, threshold)
        except ValueError as err:
            raise ValueError(f"overlapping subdomain {i}: {err}") from err
        modes.append(
            SubdomainModes(dofs=dofs, eigenvalues=lams, vectors=vecs[:, :count], count=count)
        )
    return modes


def spectra_to_csv(aux: AuxSpace, path) -> None:
    """Dump per-subdomain spectra: subdomain, mode, eigenvalue, selected flag."""
    with open(path, "w") as fh:
        fh.write("i,j,eigenvalue,selected\n")
        for i, j, lam, sel in aux.spectra_rows():
            fh.write(f"{i},{j},{lam!r},{int(sel)}\n")
