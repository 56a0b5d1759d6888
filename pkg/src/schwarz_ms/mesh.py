"""Structured triangulations of the unit square and diffusion coefficient fields."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

_MASK64 = (1 << 64) - 1


def _splitmix64_uniform(seed: int, count: int) -> np.ndarray:
    """Uniform(0,1) samples from a SplitMix64 stream.

    The stream depends only on the integer seed, so fields regenerate
    bit-identically across platforms and library versions.
    """
    out = np.empty(count, dtype=np.float64)
    state = seed & _MASK64
    for i in range(count):
        state = (state + 0x9E3779B97F4A7C15) & _MASK64
        z = state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        z ^= z >> 31
        out[i] = (z >> 11) * 2.0**-53
    return out


@dataclass(frozen=True)
class Mesh:
    """Uniform right-triangle mesh of the unit square.

    The square is partitioned into ``n x n`` subdomain blocks, each block into
    ``m x m`` fine squares, and every fine square is cut along its lower-left
    to upper-right diagonal.  Nodes are ordered row-major from the bottom-left
    corner, so node ``(row, col)`` has index ``row * (n*m + 1) + col`` and
    coordinates ``(col*h, row*h)``.  The two triangles of fine square ``s``
    (squares also row-major) are ``2*s`` (lower) and ``2*s + 1`` (upper).
    """

    n: int
    m: int
    nodes: np.ndarray
    triangles: np.ndarray
    boundary_mask: np.ndarray

    @property
    def h(self) -> float:
        return 1.0 / (self.n * self.m)

    @property
    def cells_per_side(self) -> int:
        return self.n * self.m

    @property
    def num_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def num_triangles(self) -> int:
        return self.triangles.shape[0]

    @property
    def num_squares(self) -> int:
        return self.cells_per_side ** 2

    def node_index(self, row: int, col: int) -> int:
        return row * (self.cells_per_side + 1) + col

    def square_index(self, row: int, col: int) -> int:
        return row * self.cells_per_side + col

    def free_nodes(self) -> np.ndarray:
        """Indices of nodes not on the outer boundary."""
        return np.flatnonzero(~self.boundary_mask)

    def signed_areas(self) -> np.ndarray:
        p = self.nodes[self.triangles]
        e1 = p[:, 1] - p[:, 0]
        e2 = p[:, 2] - p[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])


def build_mesh(n: int, m: int) -> Mesh:
    """Build the structured triangulation with n*n blocks of m*m squares."""
    if n < 1 or m < 1:
        raise ValueError(f"mesh parameters must be positive, got n={n}, m={m}")
    side = n * m
    vs = side + 1
    h = 1.0 / side

    cols, rows = np.meshgrid(np.arange(vs), np.arange(vs), indexing="xy")
    # row-major: all columns of row 0 first
    nodes = np.column_stack([cols.ravel() * h, rows.ravel() * h])

    r, c = np.meshgrid(np.arange(side), np.arange(side), indexing="ij")
    ll = (r * vs + c).ravel()
    lr = ll + 1
    ul = ll + vs
    ur = ul + 1
    lower = np.column_stack([ll, lr, ur])
    upper = np.column_stack([ll, ur, ul])
    triangles = np.empty((2 * side * side, 3), dtype=np.int64)
    triangles[0::2] = lower
    triangles[1::2] = upper

    rr = rows.ravel()
    cc = cols.ravel()
    boundary = (rr == 0) | (rr == side) | (cc == 0) | (cc == side)

    return Mesh(n=n, m=m, nodes=nodes, triangles=triangles, boundary_mask=boundary)


@dataclass(frozen=True)
class ConstantSpec:
    """Uniform constant coefficient."""

    value: float


@dataclass(frozen=True)
class LogUniformSpec:
    """Log-uniform random coefficient on [lo, hi], one draw per fine square."""

    lo: float
    hi: float
    seed: int


@dataclass(frozen=True)
class CoefficientField:
    """Per-triangle positive diffusion values plus the generator that made them."""

    values: np.ndarray
    spec: ConstantSpec | LogUniformSpec


def sample_coefficient(mesh: Mesh, spec: ConstantSpec | LogUniformSpec) -> CoefficientField:
    """Generate a coefficient field on the mesh.

    Random fields draw one value per fine square (both triangles of a square
    share it) as ``exp(u)`` with ``u`` uniform on ``[log lo, log hi]``, using
    the SplitMix64 stream documented in the README.
    """
    if isinstance(spec, ConstantSpec):
        if spec.value <= 0:
            raise ValueError(f"coefficient must be positive, got {spec.value}")
        values = np.full(mesh.num_triangles, float(spec.value))
        return CoefficientField(values=values, spec=spec)
    if isinstance(spec, LogUniformSpec):
        if spec.lo <= 0:
            raise ValueError(f"lower bound must be positive, got {spec.lo}")
        if spec.hi <= spec.lo:
            raise ValueError(f"need lo < hi, got lo={spec.lo}, hi={spec.hi}")
        u = _splitmix64_uniform(spec.seed, mesh.num_squares)
        log_lo = math.log(spec.lo)
        log_hi = math.log(spec.hi)
        per_square = np.exp(log_lo + u * (log_hi - log_lo))
        values = np.repeat(per_square, 2)
        return CoefficientField(values=values, spec=spec)
    raise TypeError(f"unknown coefficient spec {spec!r}")


def coefficient_to_csv(field: CoefficientField, mesh: Mesh, path) -> None:
    """Write one value per fine square, row-major, with a provenance header."""
    per_square = field.values[0::2]
    if not np.array_equal(per_square, field.values[1::2]):
        raise ValueError("triangle pairs of a fine square must share one value")
    spec = field.spec
    if isinstance(spec, ConstantSpec):
        lo, hi, seed = spec.value, spec.value, 0
    else:
        lo, hi, seed = spec.lo, spec.hi, spec.seed
    with open(path, "w") as fh:
        fh.write(f"# {mesh.n} {mesh.m} {lo!r} {hi!r} {seed}\n")
        for v in per_square:
            fh.write(f"{v!r}\n")


def coefficient_from_csv(path, mesh: Mesh) -> CoefficientField:
    """Read a coefficient field written by :func:`coefficient_to_csv`."""
    with open(path) as fh:
        header = fh.readline()
        if not header.startswith("#"):
            raise ValueError("missing coefficient header line")
        parts = header[1:].split()
        n, m = int(parts[0]), int(parts[1])
        lo, hi, seed = float(parts[2]), float(parts[3]), int(parts[4])
        per_square = np.array([float(line) for line in fh if line.strip()])
    if (n, m) != (mesh.n, mesh.m):
        raise ValueError(f"file is for a {n}x{m} mesh, not {mesh.n}x{mesh.m}")
    if per_square.size != mesh.num_squares:
        raise ValueError(
            f"expected {mesh.num_squares} square values, got {per_square.size}"
        )
    if np.any(per_square <= 0):
        raise ValueError("coefficient values must be positive")
    spec: ConstantSpec | LogUniformSpec
    spec = ConstantSpec(lo) if lo == hi else LogUniformSpec(lo, hi, seed)
    return CoefficientField(values=np.repeat(per_square, 2), spec=spec)
