"""Stable Hermite-function evaluation, shell enumeration, and quadrature.

The normalized Hermite functions h_k are the L2(R)-orthonormal eigenfunctions
of -d^2/dx^2 + x^2 with eigenvalues 2k+1.  Everything here evaluates them
through the weighted three-term recurrence

    h_0(x)     = pi^(-1/4) exp(-x^2/2)
    h_{k+1}(x) = sqrt(2/(k+1)) x h_k(x) - sqrt(k/(k+1)) h_{k-1}(x)

which carries the Gaussian inside the recurrence, so values stay O(1) for
degrees in the thousands where the bare polynomials overflow.

Quadrature is classical Gauss-Hermite (weight e^{-x^2}) with the weights
converted to plain-Lebesgue ("adapted") weights; products of Hermite
functions up to combined degree 2m-1 are then integrated exactly.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from itertools import combinations_with_replacement

import numpy as np
from scipy.linalg import eigh_tridiagonal

__all__ = [
    "MultiIndex",
    "Basis1D",
    "QuadratureRule",
    "TensorGrid",
    "hermite_values",
    "hermite_eval_1d",
    "shell_dim",
    "enumerate_shell",
    "gauss_hermite_rule",
    "tensor_quadrature_grid",
    "uniform_grid",
    "default_node_count",
    "save_basis_cache",
    "load_basis_cache",
]

#: Largest supported node count for the tridiagonal eigen-solve.  Verified
#: stable well past this; the cap exists so absurd requests fail loudly.
MAX_QUAD_NODES = 4000

BASIS_MAGIC = b"HRB1"


@dataclass(frozen=True)
class MultiIndex:
    """A multi-index labelling one tensor Hermite eigenfunction."""

    entries: tuple[int, ...]

    def __post_init__(self):
        if any(e < 0 for e in self.entries):
            raise ValueError(f"multi-index entries must be >= 0, got {self.entries}")

    @property
    def degree(self) -> int:
        return sum(self.entries)

    @property
    def dim(self) -> int:
        return len(self.entries)


@dataclass(frozen=True)
class Basis1D:
    """Table of 1D Hermite function values, values[k][i] = h_k(points[i])."""

    k_max: int
    points: np.ndarray
    values: np.ndarray


@dataclass(frozen=True)
class QuadratureRule:
    """Gauss-Hermite rule.

    ``weights`` are the adapted (Lebesgue) weights: sum_i weights[i] g(x_i)
    equals int g dx exactly whenever g(x) e^{x^2} is a polynomial of degree
    <= 2m-1, which covers every product h_j h_k with j+k <= 2m-1.
    ``raw_weights`` are the classical e^{-x^2}-weights.
    """

    nodes: np.ndarray
    weights: np.ndarray
    raw_weights: np.ndarray

    @property
    def node_count(self) -> int:
        return self.nodes.size


@dataclass(frozen=True)
class TensorGrid:
    """Tensor-product grid with per-axis nodes and per-axis cell measures."""

    axes: tuple[np.ndarray, ...]
    axis_weights: tuple[np.ndarray, ...]

    def __post_init__(self):
        if len(self.axes) != len(self.axis_weights):
            raise ValueError("axes and axis_weights must align")
        for x, w in zip(self.axes, self.axis_weights):
            if x.size != w.size:
                raise ValueError("axis nodes and weights must have equal length")
            if not np.all(w > 0):
                raise ValueError("cell measures must be positive")

    @property
    def dim(self) -> int:
        return len(self.axes)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(x.size for x in self.axes)

    @property
    def point_count(self) -> int:
        return int(np.prod(self.shape))

    def measures(self) -> np.ndarray:
        """Per-point cell measures, shaped like the grid."""
        out = self.axis_weights[0]
        for w in self.axis_weights[1:]:
            out = np.multiply.outer(out, w)
        return out

    def meshgrid(self) -> list[np.ndarray]:
        return list(np.meshgrid(*self.axes, indexing="ij"))

    def points(self) -> np.ndarray:
        """All grid points as an (point_count, dim) array."""
        mesh = self.meshgrid()
        return np.stack([m.ravel() for m in mesh], axis=-1)


def hermite_values(k_max: int, points) -> np.ndarray:
    """Evaluate h_0..h_{k_max} at the given points; returns (k_max+1, n) array."""
    if k_max < 0:
        raise ValueError(f"k_max must be >= 0, got {k_max}")
    x = np.asarray(points, dtype=float)
    if x.ndim != 1:
        x = x.ravel()
    if x.size and not np.all(np.isfinite(x)):
        bad = x[~np.isfinite(x)][0]
        raise ValueError(f"non-finite evaluation point: {bad!r}")
    V = np.empty((k_max + 1, x.size))
    V[0] = np.pi ** -0.25 * np.exp(-0.5 * x**2)
    if k_max >= 1:
        V[1] = np.sqrt(2.0) * x * V[0]
    for k in range(1, k_max):
        V[k + 1] = np.sqrt(2.0 / (k + 1)) * x * V[k] - np.sqrt(k / (k + 1.0)) * V[k - 1]
    return V


def hermite_eval_1d(k_max: int, points) -> Basis1D:
    pts = np.asarray(points, dtype=float).ravel()
    return Basis1D(k_max=k_max, points=pts, values=hermite_values(k_max, pts))


def shell_dim(dim: int, k: int) -> int:
    """Number of multi-indices alpha in N^dim with |alpha| = k."""
    return math.comb(k + dim - 1, dim - 1)


def enumerate_shell(dim: int, k: int) -> list[MultiIndex]:
    """All alpha with |alpha| = k, in ascending lexicographic order."""
    if dim < 1:
        raise ValueError(f"dimension must be >= 1, got {dim}")
    if k < 0:
        raise ValueError(f"shell index must be >= 0, got {k}")
    out = []
    # positions of "bars" in the stars-and-bars encoding; combinations are
    # produced in lexicographic order, which maps to lexicographic alpha
    for cuts in combinations_with_replacement(range(k + 1), dim - 1):
        full = (0,) + cuts + (k,)
        alpha = tuple(full[i + 1] - full[i] for i in range(dim))
        out.append(MultiIndex(alpha))
    return out


def gauss_hermite_rule(m: int) -> QuadratureRule:
    """m-node Gauss-Hermite rule via the symmetric tridiagonal eigenproblem.

    Adapted weights are computed through the Christoffel identity
    w_i = 1 / sum_{k<m} h_k(x_i)^2, which is the log-stable form of
    raw_weight * e^{x_i^2} (raw weights underflow for m >~ 380; the
    reciprocal sum of squares never does).
    """
    if m < 1:
        raise ValueError(f"node count must be >= 1, got {m}")
    if m > MAX_QUAD_NODES:
        raise ValueError(f"node count {m} above the stability cap {MAX_QUAD_NODES}")
    if m == 1:
        nodes = np.array([0.0])
    else:
        off = np.sqrt(np.arange(1, m) / 2.0)
        nodes = eigh_tridiagonal(np.zeros(m), off, eigvals_only=True)
        nodes = 0.5 * (nodes - nodes[::-1])  # enforce exact symmetry about 0
    V = hermite_values(m - 1, nodes)
    weights = 1.0 / np.sum(V**2, axis=0)
    weights = 0.5 * (weights + weights[::-1])
    raw = weights * np.exp(-(nodes**2))
    return QuadratureRule(nodes=nodes, weights=weights, raw_weights=raw)


def default_node_count(k_max: int) -> int:
    """Node count per axis for a max shell k_max: exactness plus margin."""
    return k_max + 16


def tensor_quadrature_grid(dim: int, m: int) -> TensorGrid:
    """Tensor Gauss-Hermite grid with adapted (Lebesgue) cell measures."""
    rule = gauss_hermite_rule(m)
    return TensorGrid(
        axes=tuple(rule.nodes for _ in range(dim)),
        axis_weights=tuple(rule.weights for _ in range(dim)),
    )


def uniform_grid(dim: int, half_width: float, cells: int) -> TensorGrid:
    """Uniform cell-centred grid on [-half_width, half_width]^dim."""
    if cells < 1:
        raise ValueError("need at least one cell per axis")
    h = 2.0 * half_width / cells
    centers = -half_width + h * (np.arange(cells) + 0.5)
    w = np.full(cells, h)
    return TensorGrid(axes=(centers,) * dim, axis_weights=(w,) * dim)


# ---------------------------------------------------------------------------
# cached basis file, magic "HRB1":
#   u32 dim | u32 k_max | u32 node count per axis
#   then per axis: f64 nodes, then per axis: f64 values row-major [k][i]
# all little-endian
# ---------------------------------------------------------------------------

def save_basis_cache(path, dim: int, k_max: int, m: int) -> None:
    rule = gauss_hermite_rule(m)
    values = hermite_values(k_max, rule.nodes)
    with open(path, "wb") as fh:
        fh.write(BASIS_MAGIC)
        fh.write(struct.pack("<III", dim, k_max, m))
        for _ in range(dim):
            fh.write(rule.nodes.astype("<f8").tobytes())
        for _ in range(dim):
            fh.write(values.astype("<f8").tobytes(order="C"))


def load_basis_cache(path) -> tuple[int, Basis1D, TensorGrid]:
    """Load a cached basis; returns (dim, basis table, quadrature grid)."""
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != BASIS_MAGIC:
            raise ValueError(f"bad basis cache magic {magic!r}, expected {BASIS_MAGIC!r}")
        dim, k_max, m = struct.unpack("<III", fh.read(12))
        axes = []
        for _ in range(dim):
            axes.append(np.frombuffer(fh.read(8 * m), dtype="<f8").copy())
        tables = []
        for _ in range(dim):
            flat = np.frombuffer(fh.read(8 * m * (k_max + 1)), dtype="<f8").copy()
            tables.append(flat.reshape(k_max + 1, m))
    rule = gauss_hermite_rule(m)
    if not np.allclose(axes[0], rule.nodes, atol=1e-12):
        raise ValueError("cached nodes disagree with recomputed quadrature rule")
    basis = Basis1D(k_max=k_max, points=axes[0], values=tables[0])
    grid = TensorGrid(axes=tuple(axes), axis_weights=tuple(rule.weights for _ in range(dim)))
    return dim, basis, grid
