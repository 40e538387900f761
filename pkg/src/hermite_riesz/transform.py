"""Hermite transform, shell projections, and scalar functional calculus.

The operator -Laplacian + |x|^2 on R^n acts diagonally on shells: every
multi-index alpha with |alpha| = k is an eigenfunction with eigenvalue
2k + n.  A scalar profile F applied to the square root of the operator
therefore scales shell k by F(sqrt(2k+n)).  Coefficients are stored per
shell (every operation here is shell-diagonal), in ascending lexicographic
multi-index order within a shell.
"""

from __future__ import annotations

import struct
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

from .basis import (
    TensorGrid,
    enumerate_shell,
    gauss_hermite_rule,
    hermite_values,
    shell_dim,
)

__all__ = [
    "GridFunction",
    "CoeffRep",
    "MultiplierSpec",
    "KernelMatrix",
    "analyze",
    "synthesize",
    "project_shell",
    "apply_multiplier",
    "product_multiplier",
    "bochner_riesz_spec",
    "heat_multiplier",
    "critical_index",
    "gamma_index",
    "admissible_p_max",
    "eigenvalue",
    "projection_kernel_diag",
    "multiplier_kernel",
    "mehler_heat_kernel",
    "free_heat_kernel",
    "save_coeffs",
    "load_coeffs",
]

COEFF_MAGIC = b"HRC1"


@dataclass(frozen=True)
class GridFunction:
    """Sampled values of a function on a tensor grid."""

    grid: TensorGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.shape != self.grid.shape:
            raise ValueError(f"values shape {v.shape} != grid shape {self.grid.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("grid function contains non-finite values")
        object.__setattr__(self, "values", v)

    def lp_norm(self, p: float) -> float:
        w = self.grid.measures()
        if np.isinf(p):
            return float(np.max(np.abs(self.values)))
        return float(np.sum(np.abs(self.values) ** p * w) ** (1.0 / p))


@dataclass
class CoeffRep:
    """Hermite coefficients grouped by shell |alpha| = k."""

    dim: int
    k_max: int
    shells: list[np.ndarray] = field(default_factory=list)

    def __post_init__(self):
        if len(self.shells) != self.k_max + 1:
            raise ValueError("need exactly k_max+1 shells")
        for k, c in enumerate(self.shells):
            if c.shape != (shell_dim(self.dim, k),):
                raise ValueError(f"shell {k} must hold {shell_dim(self.dim, k)} coefficients")

    @classmethod
    def zeros(cls, dim: int, k_max: int) -> "CoeffRep":
        return cls(dim, k_max, [np.zeros(shell_dim(dim, k)) for k in range(k_max + 1)])

    def copy(self) -> "CoeffRep":
        return CoeffRep(self.dim, self.k_max, [c.copy() for c in self.shells])

    def norm2(self) -> float:
        return float(np.sqrt(sum(float(np.vdot(c, c).real) for c in self.shells)))

    def eigenvalues(self) -> np.ndarray:
        return 2.0 * np.arange(self.k_max + 1) + self.dim

    def max_abs_diff(self, other: "CoeffRep") -> float:
        if (self.dim, self.k_max) != (other.dim, other.k_max):
            raise ValueError("coefficient layouts differ")
        return max(
            float(np.max(np.abs(a - b))) if a.size else 0.0
            for a, b in zip(self.shells, other.shells)
        )


@dataclass(frozen=True)
class MultiplierSpec:
    """A scalar spectral profile lambda -> F(lambda), extended evenly."""

    eval: Callable[[np.ndarray], np.ndarray]
    is_even: bool = True
    fourier_support_radius: float | None = None
    envelope: tuple[float, float] | None = None  # (A, N): |F| <= A (1+|lam|)^-N
    name: str = ""

    def __call__(self, lam) -> np.ndarray:
        return np.asarray(self.eval(np.abs(np.asarray(lam, dtype=float))), dtype=float)


@dataclass(frozen=True)
class KernelMatrix:
    """Dense kernel of F(sqrt(H)) on a grid, with an audit of truncation."""

    matrix: np.ndarray
    points: np.ndarray
    measures: np.ndarray
    k_max: int
    tail_bound: float


def eigenvalue(dim: int, k) -> np.ndarray:
    """Eigenvalue 2k + n of shell k in dimension n."""
    return 2.0 * np.asarray(k, dtype=float) + dim


@lru_cache(maxsize=64)
def _shell_gather_indices(dim: int, k_max: int) -> list[tuple[np.ndarray, ...]]:
    """Per-shell fancy indices into the dense (k_max+1,)*dim coefficient block."""
    out = []
    for k in range(k_max + 1):
        idx = np.array([mi.entries for mi in enumerate_shell(dim, k)], dtype=np.intp)
        out.append(tuple(idx[:, d] for d in range(dim)))
    return out


@lru_cache(maxsize=32)
def _cached_rule_nodes(m: int) -> np.ndarray:
    return gauss_hermite_rule(m).nodes


def _grid_is_quadrature(grid: TensorGrid, k_max: int) -> bool:
    for x in grid.axes:
        if x.size < k_max + 1:
            return False
        ref = _cached_rule_nodes(x.size)
        if not np.allclose(x, ref, atol=1e-12, rtol=0):
            return False
    return True


def analyze(f: GridFunction, k_max: int, *, require_quadrature: bool = True) -> CoeffRep:
    """Hermite coefficients c_alpha = int f h_alpha, by tensor quadrature.

    Exact to roundoff when f * exp(|x|^2/2) is a polynomial of per-axis
    degree <= 2m-1-k_max.  With ``require_quadrature=False`` the contraction
    runs with whatever cell measures the grid carries (a Riemann sum on
    uniform grids); the caller owns the accuracy question in that case.
    """
    grid = f.grid
    if require_quadrature and not _grid_is_quadrature(grid, k_max):
        raise ValueError(
            "grid is not a Gauss-Hermite tensor grid compatible with "
            f"k_max={k_max} (need >= {k_max + 1} matching nodes per axis)"
        )
    T = np.asarray(f.values)
    for d in range(grid.dim):
        V = hermite_values(k_max, grid.axes[d]) * grid.axis_weights[d]
        # contract current leading axis of T against the node axis of V
        T = np.tensordot(V, T, axes=([1], [0])) if d == 0 else np.moveaxis(
            np.tensordot(V, np.moveaxis(T, d, 0), axes=([1], [0])), 0, d
        )
    gather = _shell_gather_indices(grid.dim, k_max)
    shells = [np.ascontiguousarray(T[gather[k]]) for k in range(k_max + 1)]
    return CoeffRep(grid.dim, k_max, shells)


def synthesize(c: CoeffRep, grid: TensorGrid) -> GridFunction:
    """Pointwise sum over alpha of c_alpha h_alpha on the grid."""
    if grid.dim != c.dim:
        raise ValueError("grid dimension does not match coefficients")
    dense = np.zeros((c.k_max + 1,) * c.dim, dtype=np.result_type(*[s.dtype for s in c.shells]))
    gather = _shell_gather_indices(c.dim, c.k_max)
    for k in range(c.k_max + 1):
        dense[gather[k]] = c.shells[k]
    T = dense
    for d in range(c.dim):
        V = hermite_values(c.k_max, grid.axes[d])
        T = np.moveaxis(np.tensordot(np.moveaxis(T, d, 0), V, axes=([0], [0])), -1, d)
    return GridFunction(grid, T)


def project_shell(c: CoeffRep, k: int) -> CoeffRep:
    """Zero every shell except k."""
    if not 0 <= k <= c.k_max:
        raise ValueError(f"shell {k} outside [0, {c.k_max}]")
    shells = [s.copy() if j == k else np.zeros_like(s) for j, s in enumerate(c.shells)]
    return CoeffRep(c.dim, c.k_max, shells)


def apply_multiplier(spec: MultiplierSpec, c: CoeffRep) -> CoeffRep:
    """Scale shell k by F(sqrt(2k+n)); exact on the represented span."""
    lam = np.sqrt(c.eigenvalues())
    vals = spec(lam)
    if not np.all(np.isfinite(vals)):
        k_bad = int(np.nonzero(~np.isfinite(vals))[0][0])
        raise ValueError(
            f"multiplier {spec.name or 'F'} is non-finite at shell {k_bad} "
            f"(lambda = {lam[k_bad]:.6g})"
        )
    return CoeffRep(c.dim, c.k_max, [vals[k] * s for k, s in enumerate(c.shells)])


def product_multiplier(a: MultiplierSpec, b: MultiplierSpec) -> MultiplierSpec:
    """Pointwise product; apply(a) o apply(b) == apply(product) exactly."""
    return MultiplierSpec(
        eval=lambda lam: a.eval(lam) * b.eval(lam),
        is_even=a.is_even and b.is_even,
        name=f"({a.name})*({b.name})" if a.name or b.name else "",
    )


def bochner_riesz_spec(R: float, delta: float) -> MultiplierSpec:
    """F(lambda) = (1 - lambda^2/R^2)_+^delta; vanishes for |lambda| >= R."""
    if R <= 0:
        raise ValueError(f"R must be positive, got {R}")
    if delta < 0:
        raise ValueError(f"order must be >= 0, got {delta}")

    def _eval(lam):
        lam = np.asarray(lam, dtype=float)
        t = 1.0 - (lam / R) ** 2
        inside = t > 0
        return np.where(inside, np.where(inside, t, 1.0) ** delta, 0.0)

    return MultiplierSpec(eval=_eval, is_even=True, envelope=(1.0, 0.0),
                          name=f"riesz(R={R:g},delta={delta:g})")


def heat_multiplier(t: float) -> MultiplierSpec:
    if t <= 0:
        raise ValueError(f"time must be positive, got {t}")
    return MultiplierSpec(eval=lambda lam: np.exp(-t * np.asarray(lam, dtype=float) ** 2),
                          is_even=True, name=f"heat(t={t:g})")


def admissible_p_max(n: int) -> float:
    return 2.0 * n / (n + 2.0)


def critical_index(n: int, p: float) -> float:
    """delta(p) = n(1/p - 1/2) - 1/2, the endpoint summability order."""
    if p <= 0:
        raise ValueError(f"exponent p must be positive, got {p}")
    if not (1.0 <= p <= admissible_p_max(n) + 1e-12):
        warnings.warn(
            f"p={p:g} outside the admissible range [1, {admissible_p_max(n):g}] "
            f"for n={n}",
            stacklevel=2,
        )
    return n * (1.0 / p - 0.5) - 0.5


def gamma_index(n: int, p: float) -> float:
    """gamma(p) = n(1/p - 1/2) = delta(p) + 1/2 (resolvent-power exponent)."""
    if p <= 0:
        raise ValueError(f"exponent p must be positive, got {p}")
    return n * (1.0 / p - 0.5)


def projection_kernel_diag(dim: int, k: int, points) -> np.ndarray:
    """Diagonal of the shell-k projection kernel at the given points.

    Phi_k(x, x) = sum over |alpha| = k of h_alpha(x)^2 >= 0.  For tensor
    indices this is an (dim-1)-fold degree convolution of per-axis squared
    values, done by direct DP in O(k^2 * dim * npts).
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.shape[1] != dim:
        raise ValueError(f"points must have {dim} coordinates")
    acc = hermite_values(k, pts[:, 0]) ** 2  # acc[j, p]
    for d in range(1, dim):
        sq = hermite_values(k, pts[:, d]) ** 2
        new = np.zeros_like(acc)
        for m in range(k + 1):
            new[m] = np.einsum("jp,jp->p", acc[: m + 1], sq[m::-1])
        acc = new
    return acc[k]


def _basis_block(k_max: int, dim: int, pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Rows h_alpha(point) for all |alpha| <= k_max, plus each row's shell."""
    per_axis = [hermite_values(k_max, pts[:, d]) for d in range(dim)]
    rows = []
    shells = []
    for k in range(k_max + 1):
        for mi in enumerate_shell(dim, k):
            r = per_axis[0][mi.entries[0]]
            for d in range(1, dim):
                r = r * per_axis[d][mi.entries[d]]
            rows.append(r)
            shells.append(k)
    return np.array(rows), np.array(shells)


def _tail_bound(spec: MultiplierSpec, dim: int, k_max: int, sup_diag: np.ndarray,
                horizon: int = 20000) -> float:
    """Estimate sum_{k>k_max} |F| sqrt(dim shell) sqrt(sup Phi_k) past truncation.

    The sup of Phi_k(x,x) is extrapolated by a power law fitted to the last
    computed shells; the profile itself is evaluated directly.
    """
    tail_ks = np.arange(k_max + 1, k_max + 1 + horizon)
    fvals = np.abs(spec(np.sqrt(eigenvalue(dim, tail_ks))))
    lo = max(1, k_max - 6)
    ks = np.arange(lo, k_max + 1, dtype=float)
    sup = np.maximum(sup_diag[lo:], 1e-300)
    if ks.size >= 2:
        slope, intercept = np.polyfit(np.log(ks), np.log(sup), 1)
    else:
        # too few shells to fit: assume bulk growth ~ k^(n/2 - 1), never decay
        slope = max(dim / 2.0 - 1.0, 0.0)
        intercept = np.log(max(float(sup_diag[-1]), 1e-300))
    slope = max(slope, 0.0)  # conservative: never let the fit claim decay
    sup_ext = np.exp(intercept + slope * np.log(tail_ks))
    dims = np.array([shell_dim(dim, int(k)) for k in tail_ks], dtype=float)
    terms = fvals * np.sqrt(dims) * np.sqrt(sup_ext)
    return float(np.sum(terms))


def multiplier_kernel(spec: MultiplierSpec, grid: TensorGrid, k_max: int,
                      tail_tol: float = 1e-4) -> KernelMatrix:
    """Assemble K_F(x,y) = sum_{k<=k_max} F(sqrt(2k+n)) Phi_k(x,y) on the grid.

    Raises if the estimated spectral tail beyond k_max exceeds ``tail_tol``
    relative to the assembled kernel's scale: a non-decaying profile has no
    truncation justification.
    """
    pts = grid.points()
    dim = grid.dim
    rows, shells = _basis_block(k_max, dim, pts)
    lam = np.sqrt(eigenvalue(dim, shells))
    fvals = spec(lam)
    if not np.all(np.isfinite(fvals)):
        raise ValueError("multiplier is non-finite on the truncated spectrum")
    mat = (rows * fvals[:, None]).T @ rows
    mat = 0.5 * (mat + mat.T)
    sup_diag = np.array([
        float(np.max(np.sum(rows[shells == k] ** 2, axis=0))) for k in range(k_max + 1)
    ])
    tail = _tail_bound(spec, dim, k_max, sup_diag)
    scale = float(np.max(np.abs(mat))) or 1.0
    if tail > tail_tol * scale:
        raise ValueError(
            f"spectral tail bound {tail:.3g} exceeds {tail_tol:g} * kernel scale "
            f"{scale:.3g}; raise k_max or use a decaying profile"
        )
    return KernelMatrix(matrix=mat, points=pts, measures=grid.measures().ravel(),
                        k_max=k_max, tail_bound=tail)


def mehler_heat_kernel(t: float, x, y) -> np.ndarray:
    """Closed-form heat kernel of the harmonic-oscillator semigroup.

    K_t(x,y) = (2 pi sinh 2t)^(-n/2)
               * exp(-coth(2t) (|x|^2+|y|^2)/2 + <x,y>/sinh 2t),
    the classical closed form for exp(-t(-Lap + |x|^2)).  Dominated by the
    free Gaussian kernel pointwise.
    """
    if t <= 0:
        raise ValueError(f"time must be positive, got {t}")
    xa = np.atleast_2d(np.asarray(x, dtype=float))
    ya = np.atleast_2d(np.asarray(y, dtype=float))
    if xa.shape[-1] != ya.shape[-1]:
        raise ValueError("points must share a dimension")
    n = xa.shape[-1]
    sh = np.sinh(2.0 * t)
    ch = np.cosh(2.0 * t)
    quad = -(ch / sh) * (np.sum(xa**2, -1) + np.sum(ya**2, -1)) / 2.0 \
        + np.sum(xa * ya, -1) / sh
    out = (2.0 * np.pi * sh) ** (-n / 2.0) * np.exp(quad)
    return out if out.shape else float(out)


def free_heat_kernel(t: float, x, y) -> np.ndarray:
    """Gaussian kernel (4 pi t)^(-n/2) exp(-|x-y|^2 / 4t) of the free semigroup."""
    xa = np.atleast_2d(np.asarray(x, dtype=float))
    ya = np.atleast_2d(np.asarray(y, dtype=float))
    n = xa.shape[-1]
    d2 = np.sum((xa - ya) ** 2, -1)
    return (4.0 * np.pi * t) ** (-n / 2.0) * np.exp(-d2 / (4.0 * t))


# ---------------------------------------------------------------------------
# coefficient file, magic "HRC1": u32 dim | u32 k_max | f64 coefficients
# shell-by-shell in lexicographic order, little-endian
# ---------------------------------------------------------------------------

def save_coeffs(path, c: CoeffRep) -> None:
    with open(path, "wb") as fh:
        fh.write(COEFF_MAGIC)
        fh.write(struct.pack("<II", c.dim, c.k_max))
        for s in c.shells:
            fh.write(np.asarray(s, dtype="<f8").tobytes())


def load_coeffs(path) -> CoeffRep:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != COEFF_MAGIC:
            raise ValueError(f"bad coefficient magic {magic!r}, expected {COEFF_MAGIC!r}")
        dim, k_max = struct.unpack("<II", fh.read(8))
        shells = []
        for k in range(k_max + 1):
            nk = shell_dim(dim, k)
            shells.append(np.frombuffer(fh.read(8 * nk), dtype="<f8").copy())
    return CoeffRep(dim, k_max, shells)
