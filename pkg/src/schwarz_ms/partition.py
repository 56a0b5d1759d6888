"""Subdomain partitions, overlap extension, partition of unity, oversampling.

The unit square is split into ``n x n`` square subdomains.  Overlapping
subdomains grow from the nonoverlapping ones by ``d`` node-connected layers of
fine triangles; oversampled regions grow by ``k`` rings of neighboring
subdomains (Chebyshev layers in the subdomain grid) followed by the same ``d``
fine layers, clipped at the outer boundary.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .mesh import Mesh


def _incidence(mesh: Mesh) -> sp.csr_matrix:
    tri_ids = np.repeat(np.arange(mesh.num_triangles), 3)
    ones = np.ones(tri_ids.size, dtype=np.int8)
    return sp.csr_matrix(
        (ones, (tri_ids, mesh.triangles.ravel())),
        shape=(mesh.num_triangles, mesh.num_nodes),
    )


def _region_boundary_nodes(mesh: Mesh, tris: np.ndarray) -> np.ndarray:
    """Nodes on the boundary of a triangle region: endpoints of edges used once."""
    conn = mesh.triangles[tris]
    edges = np.sort(conn[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2), axis=1)
    uniq, counts = np.unique(edges, axis=0, return_counts=True)
    return np.unique(uniq[counts == 1])


@dataclass(frozen=True)
class DomainPartition:
    """Nonoverlapping subdomains, their overlap extensions, and node bookkeeping.

    ``pou_nodes`` lists, per subdomain, the nodes where its partition-of-unity
    function may be nonzero: nodes of the overlapping subdomain that are not on
    its boundary, except that nodes on the outer boundary always count for the
    subdomains reaching them (so the nodal multiplicity never drops to zero
    there).  Interface nodes left uncovered when ``d = 0`` are assigned to the
    lowest-index subdomain containing them.  ``interior_nodes`` is the stricter
    set used by the local solves: off the overlap boundary and off the outer
    boundary.
    """

    mesh: Mesh
    d: int
    subdomain_tris: list
    subdomain_nodes: list
    overlap_tris: list
    overlap_nodes: list
    interior_nodes: list
    pou_nodes: list
    multiplicity: np.ndarray
    neighbors: list

    @property
    def num_subdomains(self) -> int:
        return self.mesh.n * self.mesh.n

    def grid_position(self, i: int) -> tuple[int, int]:
        return divmod(i, self.mesh.n)

    def summary(self) -> dict:
        """JSON-ready digest: per-subdomain sizes, overlap width, multiplicity histogram."""
        counts = np.bincount(self.multiplicity)
        return {
            "n": self.mesh.n,
            "m": self.mesh.m,
            "d": self.d,
            "overlap_width": 2 * self.d * self.mesh.h,
            "subdomain_node_counts": [int(s.size) for s in self.subdomain_nodes],
            "overlap_node_counts": [int(s.size) for s in self.overlap_nodes],
            "interior_node_counts": [int(s.size) for s in self.interior_nodes],
            "multiplicity_histogram": {
                str(v): int(c) for v, c in enumerate(counts) if c > 0
            },
        }


def build_partition(mesh: Mesh, d: int) -> DomainPartition:
    """Partition the mesh into n*n subdomains and extend each by d fine layers."""
    if d < 0 or d >= mesh.m:
        raise ValueError(f"overlap layers must satisfy 0 <= d < m, got d={d}, m={mesh.m}")
    n, m = mesh.n, mesh.m
    side = mesh.cells_per_side
    num_sub = n * n

    squares = np.arange(side * side)
    sq_row, sq_col = squares // side, squares % side
    owner = (sq_row // m) * n + (sq_col // m)
    tri_owner = np.repeat(owner, 2)

    inc = _incidence(mesh)
    boundary = mesh.boundary_mask

    subdomain_tris = [np.flatnonzero(tri_owner == i) for i in range(num_sub)]
    subdomain_nodes = [np.unique(mesh.triangles[t]) for t in subdomain_tris]

    overlap_tris = []
    overlap_nodes = []
    interior_nodes = []
    pou_nodes = []
    for i in range(num_sub):
        mask = np.zeros(mesh.num_triangles, dtype=bool)
        mask[subdomain_tris[i]] = True
        for _ in range(d):
            touched = (inc.T @ mask) > 0
            mask = (inc @ touched) > 0
        tris = np.flatnonzero(mask)
        nodes = np.unique(mesh.triangles[tris])
        rim = _region_boundary_nodes(mesh, tris)
        rim_mask = np.zeros(mesh.num_nodes, dtype=bool)
        rim_mask[rim] = True
        node_mask = np.zeros(mesh.num_nodes, dtype=bool)
        node_mask[nodes] = True
        overlap_tris.append(tris)
        overlap_nodes.append(nodes)
        interior_nodes.append(np.flatnonzero(node_mask & ~rim_mask & ~boundary))
        pou_nodes.append(np.flatnonzero(node_mask & ~(rim_mask & ~boundary)))

    multiplicity = np.zeros(mesh.num_nodes, dtype=np.int64)
    for nodes in pou_nodes:
        multiplicity[nodes] += 1
    uncovered = np.flatnonzero(multiplicity == 0)
    if uncovered.size:
        # d = 0 leaves interface nodes uncovered; hand each to its first subdomain
        unassigned = np.ones(mesh.num_nodes, dtype=bool)
        unassigned[multiplicity > 0] = False
        for i in range(num_sub):
            take = overlap_nodes[i][unassigned[overlap_nodes[i]]]
            if take.size:
                pou_nodes[i] = np.sort(np.concatenate([pou_nodes[i], take]))
                multiplicity[take] = 1
                unassigned[take] = False
    if np.any(multiplicity == 0):
        raise RuntimeError("some node belongs to no subdomain")

    # n(i): subdomains whose partition-of-unity support meets subdomain i
    pou_mask = np.zeros((num_sub, mesh.num_nodes), dtype=bool)
    for l, nodes in enumerate(pou_nodes):
        pou_mask[l, nodes] = True
    neighbors = []
    for i in range(num_sub):
        conn = mesh.triangles[subdomain_tris[i]].ravel()
        touch = pou_mask[:, conn].any(axis=1)
        neighbors.append(np.flatnonzero(touch))

    return DomainPartition(
        mesh=mesh,
        d=d,
        subdomain_tris=subdomain_tris,
        subdomain_nodes=subdomain_nodes,
        overlap_tris=overlap_tris,
        overlap_nodes=overlap_nodes,
        interior_nodes=interior_nodes,
        pou_nodes=pou_nodes,
        multiplicity=multiplicity,
        neighbors=neighbors,
    )


@dataclass(frozen=True)
class PartitionOfUnity:
    """Nodal partition-of-unity functions and their squared-gradient weights.

    ``theta`` stores one sparse row per subdomain over all mesh nodes;
    ``grad_sq`` one sparse row per subdomain of per-triangle ``|grad theta|^2``;
    ``aggregate_grad_sq`` is the per-triangle sum of all rows, the weight of
    the spectral mass forms.
    """

    partition: DomainPartition
    theta: sp.csr_matrix
    grad_sq: sp.csr_matrix
    aggregate_grad_sq: np.ndarray

    def theta_vector(self, i: int) -> np.ndarray:
        return np.asarray(self.theta.getrow(i).todense()).ravel()

    def grad_sq_vector(self, i: int) -> np.ndarray:
        return np.asarray(self.grad_sq.getrow(i).todense()).ravel()


def build_pou(partition: DomainPartition) -> PartitionOfUnity:
    """Build theta_i = 1/multiplicity at the nodes owned by subdomain i."""
    mesh = partition.mesh
    if np.any(partition.multiplicity == 0):
        raise ValueError("partition leaves a node with multiplicity zero")
    inv_mult = 1.0 / partition.multiplicity

    rows, cols, data = [], [], []
    for i, nodes in enumerate(partition.pou_nodes):
        rows.append(np.full(nodes.size, i))
        cols.append(nodes)
        data.append(inv_mult[nodes])
    theta = sp.csr_matrix(
        (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
        shape=(partition.num_subdomains, mesh.num_nodes),
    )

    p = mesh.nodes[mesh.triangles]
    area = mesh.signed_areas()
    grads = np.empty((mesh.num_triangles, 3, 2))
    for a in range(3):
        b, c = (a + 1) % 3, (a + 2) % 3
        grads[:, a, 0] = p[:, b, 1] - p[:, c, 1]
        grads[:, a, 1] = p[:, c, 0] - p[:, b, 0]
    grads /= (2.0 * area)[:, None, None]

    g_rows, g_cols, g_data = [], [], []
    inc = _incidence(mesh)
    for i in range(partition.num_subdomains):
        vals = np.asarray(theta.getrow(i).todense()).ravel()
        cand = np.flatnonzero((inc @ (vals != 0)) > 0)
        nodal = vals[mesh.triangles[cand]]
        g = np.einsum("ta,tad->td", nodal, grads[cand])
        mag = np.einsum("td,td->t", g, g)
        nz = mag > 0
        g_rows.append(np.full(nz.sum(), i))
        g_cols.append(cand[nz])
        g_data.append(mag[nz])
    grad_sq = sp.csr_matrix(
        (np.concatenate(g_data), (np.concatenate(g_rows), np.concatenate(g_cols))),
        shape=(partition.num_subdomains, mesh.num_triangles),
    )
    aggregate = np.asarray(grad_sq.sum(axis=0)).ravel()

    return PartitionOfUnity(
        partition=partition,
        theta=theta,
        grad_sq=grad_sq,
        aggregate_grad_sq=aggregate,
    )


@dataclass(frozen=True)
class OversampledRegion:
    """Subdomain i grown by k rings of subdomains plus the partition's d fine layers."""

    i: int
    k: int
    tris: np.ndarray
    nodes: np.ndarray
    free_nodes: np.ndarray


def build_oversampled(partition: DomainPartition, i: int, k: int) -> OversampledRegion:
    """Build the oversampled region around subdomain i.

    ``free_nodes`` are the admissible dofs of the region: off its rim and off
    the outer boundary, i.e. the zero-extension dofs of the localized solves.
    """
    mesh = partition.mesh
    if not 0 <= i < partition.num_subdomains:
        raise ValueError(f"subdomain index {i} out of range")
    if k < 0:
        raise ValueError("ring count must be nonnegative")
    n = mesh.n
    row, col = partition.grid_position(i)
    mask = np.zeros(mesh.num_triangles, dtype=bool)
    for l in range(partition.num_subdomains):
        r, c = partition.grid_position(l)
        if max(abs(r - row), abs(c - col)) <= k:
            mask[partition.subdomain_tris[l]] = True
    inc = _incidence(mesh)
    for _ in range(partition.d):
        touched = (inc.T @ mask) > 0
        mask = (inc @ touched) > 0
    tris = np.flatnonzero(mask)
    nodes = np.unique(mesh.triangles[tris])
    rim = _region_boundary_nodes(mesh, tris)
    keep = np.zeros(mesh.num_nodes, dtype=bool)
    keep[nodes] = True
    keep[rim] = False
    keep[mesh.boundary_mask] = False
    return OversampledRegion(i=i, k=k, tris=tris, nodes=nodes, free_nodes=np.flatnonzero(keep))
