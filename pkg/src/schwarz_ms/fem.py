"""P1 finite element assembly: stiffness, loads, weighted mass forms.

All element integrals are closed-form (gradients and weights are constant per
triangle), so assembly introduces no quadrature error.  Dirichlet conditions
are imposed by elimination: matrices and vectors are indexed by a
:class:`DofMap` selecting the active nodes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.io import mmwrite

from .mesh import CoefficientField, Mesh


@dataclass(frozen=True)
class DofMap:
    """Mapping between a subset of mesh nodes and contiguous dof indices."""

    nodes: np.ndarray
    index: np.ndarray

    def __len__(self) -> int:
        return self.nodes.size

    @classmethod
    def from_nodes(cls, node_ids: np.ndarray, num_nodes: int) -> "DofMap":
        node_ids = np.asarray(node_ids, dtype=np.int64)
        index = np.full(num_nodes, -1, dtype=np.int64)
        index[node_ids] = np.arange(node_ids.size)
        return cls(nodes=node_ids, index=index)

    @classmethod
    def free(cls, mesh: Mesh) -> "DofMap":
        """Dofs at all nodes off the outer boundary."""
        return cls.from_nodes(mesh.free_nodes(), mesh.num_nodes)

    def restrict(self, full: np.ndarray) -> np.ndarray:
        return full[self.nodes]

    def extend(self, values: np.ndarray) -> np.ndarray:
        full = np.zeros(self.index.size, dtype=float)
        full[self.nodes] = values
        return full


def _coefficient_values(rho, num_triangles: int) -> np.ndarray:
    values = rho.values if isinstance(rho, CoefficientField) else np.asarray(rho, float)
    if values.ndim == 0:
        values = np.full(num_triangles, float(values))
    if values.size != num_triangles:
        raise ValueError("coefficient must provide one value per triangle")
    return values


def _triangle_geometry(mesh: Mesh, tris: np.ndarray):
    p = mesh.nodes[mesh.triangles[tris]]
    e1 = p[:, 1] - p[:, 0]
    e2 = p[:, 2] - p[:, 0]
    area = 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])
    # grad of barycentric a is the rotated edge opposite to a over 2*area
    grads = np.empty((tris.size, 3, 2))
    for a in range(3):
        b, c = (a + 1) % 3, (a + 2) % 3
        grads[:, a, 0] = p[:, b, 1] - p[:, c, 1]
        grads[:, a, 1] = p[:, c, 0] - p[:, b, 0]
    grads /= (2.0 * area)[:, None, None]
    return area, grads


def _scatter(element: np.ndarray, conn: np.ndarray, dofs: DofMap) -> sp.csr_matrix:
    rows = np.repeat(conn, 3, axis=1).ravel()
    cols = np.tile(conn, (1, 3)).ravel()
    data = element.ravel()
    ri = dofs.index[rows]
    ci = dofs.index[cols]
    keep = (ri >= 0) & (ci >= 0)
    ndof = len(dofs)
    mat = sp.coo_matrix((data[keep], (ri[keep], ci[keep])), shape=(ndof, ndof))
    return mat.tocsr()


def assemble_stiffness(
    mesh: Mesh,
    rho,
    support: np.ndarray | None = None,
    dofs: DofMap | None = None,
) -> sp.csr_matrix:
    """Assemble the diffusion stiffness matrix over the given triangles.

    Defaults integrate over the whole mesh with dofs at the free (interior)
    nodes, which yields the symmetric positive definite global system.
    """
    values = _coefficient_values(rho, mesh.num_triangles)
    if np.any(values <= 0):
        raise ValueError("diffusion coefficient must be strictly positive")
    if dofs is None:
        dofs = DofMap.free(mesh)
    tris = np.arange(mesh.num_triangles) if support is None else np.asarray(support)
    area, grads = _triangle_geometry(mesh, tris)
    scale = (values[tris] * area)[:, None, None]
    element = scale * np.einsum("tad,tbd->tab", grads, grads)
    return _scatter(element, mesh.triangles[tris], dofs)


def assemble_load(mesh: Mesh, f, dofs: DofMap | None = None) -> np.ndarray:
    """Load vector for a piecewise-constant source: area/3 per incident triangle."""
    f_values = np.asarray(f, float)
    if f_values.ndim == 0:
        f_values = np.full(mesh.num_triangles, float(f_values))
    if not np.all(np.isfinite(f_values)):
        raise ValueError("source must be finite")
    if dofs is None:
        dofs = DofMap.free(mesh)
    area = mesh.signed_areas()
    contrib = (f_values * area / 3.0)[:, None].repeat(3, axis=1)
    out = np.zeros(len(dofs))
    idx = dofs.index[mesh.triangles.ravel()]
    keep = idx >= 0
    np.add.at(out, idx[keep], contrib.ravel()[keep])
    return out


_MASS_REF = np.array([[2.0, 1.0, 1.0], [1.0, 2.0, 1.0], [1.0, 1.0, 2.0]]) / 12.0


def assemble_weighted_mass(
    mesh: Mesh,
    rho,
    weight,
    support: np.ndarray | None = None,
    dofs: DofMap | None = None,
) -> sp.csr_matrix:
    """Weighted mass matrix: per-triangle rho*weight times the exact P1 mass.

    The weight is a nonnegative per-triangle constant (typically an aggregate
    of squared partition-of-unity gradients); the result is positive
    semidefinite on the selected dofs.
    """
    values = _coefficient_values(rho, mesh.num_triangles)
    w = np.asarray(weight, float)
    if w.ndim == 0:
        w = np.full(mesh.num_triangles, float(w))
    if np.any(w < 0):
        raise ValueError("mass weights must be nonnegative")
    if dofs is None:
        dofs = DofMap.free(mesh)
    tris = np.arange(mesh.num_triangles) if support is None else np.asarray(support)
    area = mesh.signed_areas()[tris]
    scale = values[tris] * w[tris] * area
    element = scale[:, None, None] * _MASS_REF[None, :, :]
    return _scatter(element, mesh.triangles[tris], dofs)


def nodal_interpolant_product(theta: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Nodal interpolant of a product of P1 functions: the entrywise product."""
    theta = np.asarray(theta, float)
    v = np.asarray(v, float)
    if theta.shape != v.shape:
        raise ValueError("factors must be defined on the same nodes")
    return theta * v


def export_matrix_market(matrix: sp.spmatrix, path) -> None:
    """Dump a matrix in Matrix Market coordinate format for debugging."""
    mmwrite(path, sp.coo_matrix(matrix), symmetry="general")
