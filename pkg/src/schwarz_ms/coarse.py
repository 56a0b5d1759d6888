"""Energy-minimizing multiscale coarse spaces.

A coarse basis function for mode j of subdomain i minimizes the energy plus
weighted-mass penalties tying it to the auxiliary spectral modes.  The
stationarity system is symmetric positive definite,

    (A + sum_k G_k^T G_k) psi = G_i^T e_j,

where row r of ``G_k`` is the weighted-mass product of auxiliary mode r of
subdomain k (so ``G_k v`` are the projection coefficients of v).  Solving on
the whole domain gives the global space; solving on an oversampled region with
zero exterior values and extending by zero gives the localized space, which
converges to the global one as the region grows thanks to the exponential
decay of the global functions.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .fem import DofMap, assemble_stiffness, assemble_weighted_mass, nodal_interpolant_product
from .mesh import CoefficientField, Mesh
from .partition import (
    DomainPartition,
    OversampledRegion,
    PartitionOfUnity,
    build_oversampled,
)
from .spectral import AuxSpace, galvis_modes


@dataclass(frozen=True)
class CoarseSpace:
    """Coarse restriction operator: one row of free-node values per basis function."""

    R0: sp.csr_matrix
    kind: str
    counts: np.ndarray
    k: int | None = None

    @property
    def dim(self) -> int:
        return self.R0.shape[0]

    @property
    def pD(self) -> float:
        return float(self.counts.sum() / self.counts.size)

    def to_csv(self, path) -> None:
        """Per-function nodal values (free nodes, dense rows) for visualization."""
        dense = self.R0.toarray()
        with open(path, "w") as fh:
            for row in dense:
                fh.write(",".join(repr(v) for v in row) + "\n")


@dataclass
class EnergyForms:
    """Assembled operators shared by all coarse-basis solves.

    ``S[k]`` is the weighted mass of subdomain k in global free-node indexing,
    ``Phi[k]`` its selected auxiliary modes extended by zero (columns), and
    ``G[k] = Phi[k]^T S[k]`` the projection-coefficient map.
    """

    mesh: Mesh
    rho: CoefficientField
    partition: DomainPartition
    pou: PartitionOfUnity
    aux: AuxSpace
    free: DofMap
    A: sp.csr_matrix
    S: list
    Phi: list
    G: list
    Gstack: sp.csr_matrix
    _global_lu: object = field(default=None, repr=False)

    def s_product(self, k: int, u: np.ndarray, v: np.ndarray) -> float:
        return float(u @ (self.S[k] @ v))

    def global_solver(self):
        if self._global_lu is None:
            B = (self.A + self.Gstack.T @ self.Gstack).tocsc()
            self._global_lu = _factor(B, "global minimization system")
        return self._global_lu


def _factor(matrix: sp.csc_matrix, label: str):
    try:
        return splu(matrix)
    except RuntimeError as err:
        cond = np.inf
        if matrix.shape[0] <= 2000:
            cond = float(np.linalg.cond(matrix.toarray()))
        raise RuntimeError(f"singular {label} (cond estimate {cond:.3e})") from err


def build_forms(
    mesh: Mesh,
    rho: CoefficientField,
    partition: DomainPartition,
    pou: PartitionOfUnity,
    aux: AuxSpace,
) -> EnergyForms:
    """Assemble the global stiffness and the per-subdomain projection maps."""
    free = DofMap.free(mesh)
    A = assemble_stiffness(mesh, rho, dofs=free)
    S, Phi, G = [], [], []
    for k in range(partition.num_subdomains):
        S_k = assemble_weighted_mass(
            mesh,
            rho,
            pou.aggregate_grad_sq,
            support=partition.subdomain_tris[k],
            dofs=free,
        )
        modes = aux.modes[k]
        rows = free.index[modes.dofs.nodes]
        if np.any(rows < 0):
            raise RuntimeError("auxiliary dofs must avoid the outer boundary")
        cols = np.repeat(np.arange(modes.count)[None, :], rows.size, axis=0)
        Phi_k = sp.csr_matrix(
            (modes.vectors.ravel(), (np.repeat(rows, modes.count), cols.ravel())),
            shape=(len(free), modes.count),
        )
        S.append(S_k)
        Phi.append(Phi_k)
        G.append((S_k @ Phi_k).T.tocsr())
    Gstack = sp.vstack(G).tocsr()
    return EnergyForms(
        mesh=mesh,
        rho=rho,
        partition=partition,
        pou=pou,
        aux=aux,
        free=free,
        A=A,
        S=S,
        Phi=Phi,
        G=G,
        Gstack=Gstack,
    )


def apply_pi(forms: EnergyForms, k: int, v: np.ndarray):
    """Project a free-node vector on the auxiliary modes of subdomain k.

    Returns the coefficient vector and the projected nodal vector.
    """
    coeffs = np.asarray(forms.G[k] @ v).ravel()
    return coeffs, np.asarray(forms.Phi[k] @ coeffs).ravel()


def build_glb_basis(forms: EnergyForms, i: int, j: int) -> np.ndarray:
    """Solve the minimization over the whole domain for mode j of subdomain i."""
    if not 0 <= j < forms.aux.modes[i].count:
        raise ValueError(f"subdomain {i} has no selected mode {j}")
    rhs = forms.G[i].toarray()[j]
    return forms.global_solver().solve(rhs)


def _ms_block(forms: EnergyForms, region: OversampledRegion, i: int) -> np.ndarray:
    """All localized basis functions of subdomain i, as columns on free dofs."""
    loc = forms.free.index[region.free_nodes]
    if np.any(loc < 0):
        raise RuntimeError("region free nodes must be free in the global system")
    A_loc = forms.A[loc][:, loc]
    G_loc = forms.Gstack.tocsc()[:, loc]
    B = (A_loc + G_loc.T @ G_loc).tocsc()
    lu = _factor(B, f"local minimization system of subdomain {i}")
    rhs = forms.G[i].toarray()[:, loc]
    sols = lu.solve(rhs.T)
    if sols.ndim == 1:
        sols = sols[:, None]
    out = np.zeros((len(forms.free), sols.shape[1]))
    out[loc] = sols
    return out


def build_ms_basis(
    forms: EnergyForms, i: int, j: int, region: OversampledRegion
) -> np.ndarray:
    """Localized basis function for mode j of subdomain i, extended by zero."""
    if region.i != i:
        raise ValueError("region does not belong to the requested subdomain")
    if not 0 <= j < forms.aux.modes[i].count:
        raise ValueError(f"subdomain {i} has no selected mode {j}")
    return _ms_block(forms, region, i)[:, j]


def build_galvis_coarse(
    mesh: Mesh,
    rho: CoefficientField,
    partition: DomainPartition,
    pou: PartitionOfUnity,
    threshold: float,
) -> CoarseSpace:
    """Baseline coarse space: partition-of-unity times overlapping-subdomain modes."""
    modes = galvis_modes(mesh, rho, partition, pou, threshold)
    free = DofMap.free(mesh)
    rows = []
    for i, md in enumerate(modes):
        theta = pou.theta_vector(i)
        for j in range(md.count):
            full = md.dofs.extend(md.vectors[:, j])
            rows.append(free.restrict(nodal_interpolant_product(theta, full)))
    R0 = sp.csr_matrix(np.vstack(rows))
    counts = np.array([md.count for md in modes])
    return CoarseSpace(R0=R0, kind="galvis", counts=counts)


def build_coarse_space(
    kind: str,
    *,
    forms: EnergyForms | None = None,
    k: int | None = None,
    mesh: Mesh | None = None,
    rho: CoefficientField | None = None,
    partition: DomainPartition | None = None,
    pou: PartitionOfUnity | None = None,
    threshold: float | None = None,
    workers: int = 1,
) -> CoarseSpace:
    """Assemble the requested coarse space.

    ``glb`` and ``ms`` take the assembled forms (``ms`` also the ring count k);
    ``galvis`` takes the raw mesh data and its own threshold.
    """
    if kind == "galvis":
        return build_galvis_coarse(mesh, rho, partition, pou, threshold)
    if forms is None:
        raise ValueError(f"coarse space '{kind}' needs assembled forms")
    part = forms.partition
    counts = forms.aux.counts
    if kind == "glb":
        lu = forms.global_solver()
        rhs = sp.vstack(forms.G).toarray()
        R0 = sp.csr_matrix(lu.solve(rhs.T).T)
        return CoarseSpace(R0=R0, kind="glb", counts=counts)
    if kind == "ms":
        if k is None:
            raise ValueError("localized coarse space needs the ring count k")

        def one(i: int):
            region = build_oversampled(part, i, k)
            return _ms_block(forms, region, i)

        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                blocks = list(pool.map(one, range(part.num_subdomains)))
        else:
            blocks = [one(i) for i in range(part.num_subdomains)]
        R0 = sp.csr_matrix(np.hstack(blocks).T)
        return CoarseSpace(R0=R0, kind="ms", counts=counts, k=k)
    raise ValueError(f"unknown coarse space kind '{kind}'")


def triangle_energy(forms: EnergyForms, psi_free: np.ndarray) -> np.ndarray:
    """Per-triangle energy density of a free-node function."""
    mesh = forms.mesh
    full = forms.free.extend(psi_free)
    p = mesh.nodes[mesh.triangles]
    area = mesh.signed_areas()
    grads = np.empty((mesh.num_triangles, 3, 2))
    for a in range(3):
        b, c = (a + 1) % 3, (a + 2) % 3
        grads[:, a, 0] = p[:, b, 1] - p[:, c, 1]
        grads[:, a, 1] = p[:, c, 0] - p[:, b, 0]
    grads /= (2.0 * area)[:, None, None]
    nodal = full[mesh.triangles]
    g = np.einsum("ta,tad->td", nodal, grads)
    return forms.rho.values * area * np.einsum("td,td->t", g, g)


def decay_profile(forms: EnergyForms, psi_free: np.ndarray, i: int) -> np.ndarray:
    """Tail energies of a global basis function outside growing subdomain rings.

    Entry k is the energy of psi outside the ring of k subdomain layers around
    subdomain i plus the squared projection mass on the subdomains fully
    outside that ring, for k = 0..n.
    """
    part = forms.partition
    mesh = forms.mesh
    energy = triangle_energy(forms, psi_free)
    proj_sq = np.array(
        [float(np.sum(np.asarray(forms.G[l] @ psi_free) ** 2)) for l in range(part.num_subdomains)]
    )
    row, col = part.grid_position(i)
    tails = np.empty(mesh.n + 1)
    for k in range(mesh.n + 1):
        inside_tris = np.zeros(mesh.num_triangles, dtype=bool)
        outside_subs = []
        for l in range(part.num_subdomains):
            r, c = part.grid_position(l)
            if max(abs(r - row), abs(c - col)) <= k:
                inside_tris[part.subdomain_tris[l]] = True
            else:
                outside_subs.append(l)
        tails[k] = energy[~inside_tris].sum() + proj_sq[outside_subs].sum()
    return tails


def energy_norm(A: sp.spmatrix, v: np.ndarray) -> float:
    return float(np.sqrt(max(v @ (A @ v), 0.0)))
