"""Dyadic stopping-time decomposition of |f|^p at a given height.

Splits f = g + sum_j b_j on a uniform dyadic grid: maximal dyadic cubes
whose |f|^p average exceeds alpha^p are selected, b_j := f restricted to
cube j (no mean-zero correction: the downstream arguments consume only
support, overlap, and the L^p mass bound), and g is f with the selected
cubes zeroed.  Reconstruction is bit-exact by construction.

Selection descends to single cells, so |g| <= alpha pointwise on the grid
(a leaf's value is its own average); the classical parent-average argument
would give the weaker 2^(n/p) alpha, which is what callers should rely on.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .basis import TensorGrid
from .transform import GridFunction

__all__ = [
    "CZPart",
    "CZOutput",
    "cz_decompose",
    "verify_cz",
    "partition_by_radius",
    "overlap_bound",
    "ball_volume",
    "audit_rows",
]


@dataclass(frozen=True)
class CZPart:
    """One selected cube with its circumscribed ball and the values inside."""

    center: np.ndarray
    side: float
    radius: float          # (sqrt(n)/2) * side
    slices: tuple[slice, ...]
    block: np.ndarray      # copy of f on the cube
    mass_p: float          # integral of |b_j|^p

    @property
    def dim(self) -> int:
        return self.center.size

    def cube_volume(self) -> float:
        return self.side ** self.dim

    def ball_volume(self) -> float:
        return ball_volume(self.dim, self.radius)

    def scatter(self, shape) -> np.ndarray:
        out = np.zeros(shape, dtype=self.block.dtype)
        out[self.slices] = self.block
        return out


@dataclass
class CZOutput:
    g: GridFunction
    parts: list[CZPart]
    alpha: float
    p: float
    constants: dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return self.g.grid.dim


def ball_volume(n: int, r: float) -> float:
    return math.pi ** (n / 2.0) / math.gamma(n / 2.0 + 1.0) * r**n


def overlap_bound(n: int, levels: int) -> int:
    """Documented overlap cap for 4-dilated circumscribed balls on the grid.

    A point lies in 4B_j iff |x - c_j| <= 2 sqrt(n) side_j; at one dyadic
    level the centers form a lattice of spacing side_j, giving at most
    (2 ceil(2 sqrt(n)) + 1)^n hits, and the grid has ``levels`` levels.
    """
    per_level = (2 * math.ceil(2.0 * math.sqrt(n)) + 1) ** n
    return per_level * levels


def _check_dyadic(grid: TensorGrid) -> int:
    """Validate a uniform dyadic tensor grid; returns cells-per-axis."""
    m = grid.shape[0]
    if any(s != m for s in grid.shape):
        raise ValueError("dyadic decomposition needs equal cells per axis")
    if m & (m - 1):
        raise ValueError(f"cells per axis must be a power of two, got {m}")
    for x, w in zip(grid.axes, grid.axis_weights):
        h = np.diff(x)
        if x.size > 1 and not np.allclose(h, h[0], rtol=1e-12, atol=0):
            raise ValueError("grid must be uniform")
        if not np.allclose(w, w[0], rtol=1e-12, atol=0):
            raise ValueError("grid must carry constant cell measures")
        if not np.allclose(x, grid.axes[0], rtol=1e-12, atol=1e-300):
            raise ValueError("axes must agree (square box)")
    return m


def cz_decompose(f: GridFunction, alpha: float, p: float = 1.0) -> CZOutput:
    """Stopping-time decomposition of |f|^p at height alpha over the dyadic tree.

    A cube is selected when its |f|^p average strictly exceeds alpha^p
    (ties are not selected) and no ancestor was selected.  If the root
    itself exceeds the height, it is returned as the single part with a
    warning: the classical bounds that rely on an unselected parent are
    void in that case.
    """
    if alpha <= 0:
        raise ValueError(f"height must be positive, got {alpha}")
    if p < 1:
        raise ValueError(f"exponent must be >= 1, got {p}")
    m = _check_dyadic(f.grid)
    n = f.grid.dim
    levels = m.bit_length() - 1  # grid holds levels 0..levels
    h = float(f.grid.axis_weights[0][0])
    cell_vol = h**n
    box_side = m * h
    origin = float(f.grid.axes[0][0]) - h / 2.0

    dens = np.abs(f.values) ** p * cell_vol
    # mass pyramid: masses[l] has (2^l)^n blocks
    masses = [dens]
    cur = dens
    for _ in range(levels):
        newshape = ()
        for s in cur.shape:
            newshape += (s // 2, 2)
        cur = cur.reshape(newshape).sum(axis=tuple(range(1, 2 * n, 2)))
        masses.append(cur)
    masses = masses[::-1]  # masses[l] now indexed by level l (0 = root)

    hp = alpha**p
    selected: list[tuple[int, tuple[int, ...]]] = []
    frontier = [(0,) * n]
    root_selected = False
    for lvl in range(levels + 1):
        if not frontier:
            break
        side = box_side / 2**lvl
        vol = side**n
        idx = np.array(frontier, dtype=np.intp)
        mass = masses[lvl][tuple(idx.T)]
        keep = mass > hp * vol
        for i in np.nonzero(keep)[0]:
            selected.append((lvl, tuple(idx[i])))
        if lvl == 0 and keep.any():
            root_selected = True
            warnings.warn("root cube exceeds the stopping height; returning it whole",
                          stacklevel=2)
            frontier = []
            break
        if lvl == levels:
            break
        nxt = []
        rest = idx[~keep]
        for base in rest:
            for off in np.ndindex(*(2,) * n):
                nxt.append(tuple(2 * b + o for b, o in zip(base, off)))
        frontier = nxt

    parts: list[CZPart] = []
    gvals = np.array(f.values, copy=True)
    for lvl, cube_idx in selected:
        width = m >> lvl  # cells per cube side at this level
        sl = tuple(slice(c * width, (c + 1) * width) for c in cube_idx)
        block = np.array(f.values[sl], copy=True)
        side = box_side / 2**lvl
        center = np.array([origin + (c + 0.5) * side for c in cube_idx])
        mass_p = float(np.sum(np.abs(block) ** p) * cell_vol)
        parts.append(CZPart(center=center, side=side,
                            radius=math.sqrt(n) / 2.0 * side,
                            slices=sl, block=block, mass_p=mass_p))
        gvals[sl] = 0.0

    edge = 0.0
    if m >= 2:
        for axis in range(n):
            sl_lo = tuple(slice(None) if a != axis else 0 for a in range(n))
            sl_hi = tuple(slice(None) if a != axis else -1 for a in range(n))
            edge = max(edge, float(np.max(np.abs(f.values[sl_lo]))),
                       float(np.max(np.abs(f.values[sl_hi]))))
    fmax = float(np.max(np.abs(f.values))) or 1.0
    constants = {
        "boundary_relative": edge / fmax,
        "root_selected": root_selected,
        "levels": levels + 1,
        "cell_side": h,
    }
    g = GridFunction(f.grid, gvals)
    return CZOutput(g=g, parts=parts, alpha=alpha, p=p, constants=constants)


def verify_cz(out: CZOutput, f: GridFunction) -> dict:
    """Recompute every decomposition property from scratch.

    Returns measured constants and pass flags against the documented bounds:
    exact reconstruction, pairwise-disjoint cubes, |g| <= 2^(n/p) alpha
    (the construction actually gives |g| <= alpha), ||g||_p <= ||f||_p,
    sum |Q_j| <= alpha^-p ||f||_p^p, per-part L^p mass against the
    dimensional ball factor, and the 4-ball overlap cap.
    """
    n = out.dim
    p, alpha = out.p, out.alpha
    shape = f.grid.shape
    cell_vol = float(np.prod([w[0] for w in f.grid.axis_weights]))

    recon = np.array(out.g.values, copy=True)
    owner = np.zeros(shape, dtype=np.int32)
    for part in out.parts:
        recon[part.slices] += part.block
        owner[part.slices] += 1
    recon_err = float(np.max(np.abs(recon - f.values))) if recon.size else 0.0
    disjoint = bool(np.max(owner) <= 1) if out.parts else True

    fp_norm_p = float(np.sum(np.abs(f.values) ** p) * cell_vol)
    g_inf = float(np.max(np.abs(out.g.values)))
    g_p = float(np.sum(np.abs(out.g.values) ** p) * cell_vol)

    sum_cubes = sum(pt.cube_volume() for pt in out.parts)
    sum_balls = sum(pt.ball_volume() for pt in out.parts)
    cube_budget = fp_norm_p / alpha**p

    # per-part mass against C alpha^p |B_j|: parent average <= alpha^p gives
    # mass <= 2^n alpha^p |Q_j|, and |Q_j| = |B_j| * 2^n / (omega_n n^(n/2))
    mass_factor = 0.0
    for pt in out.parts:
        denom = alpha**p * pt.ball_volume()
        mass_factor = max(mass_factor, pt.mass_p / denom)
    c_iv_doc = 2.0**n * 1.0 / ball_volume(n, math.sqrt(n) / 2.0)

    pts = f.grid.points()
    counts = np.zeros(pts.shape[0], dtype=np.int32)
    for pt in out.parts:
        d2 = np.sum((pts - pt.center) ** 2, axis=1)
        counts += d2 <= (4.0 * pt.radius) ** 2 + 1e-12
    k_measured = int(np.max(counts)) if out.parts else 0
    k_doc = overlap_bound(n, out.constants.get("levels", 1))

    report = {
        "reconstruction_error": recon_err,
        "cubes_disjoint": disjoint,
        "g_inf": g_inf,
        "g_inf_bound": 2.0 ** (n / p) * alpha,
        "g_inf_ok": g_inf <= 2.0 ** (n / p) * alpha + 1e-12,
        "g_p_ratio": (g_p / fp_norm_p) if fp_norm_p else 0.0,
        "g_p_ok": g_p <= fp_norm_p * (1.0 + 1e-12),
        "sum_cube_volumes": sum_cubes,
        "cube_budget": cube_budget,
        "chebyshev_ok": sum_cubes <= cube_budget * (1.0 + 1e-12),
        "sum_ball_volumes": sum_balls,
        "ball_budget_constant": ball_volume(n, math.sqrt(n) / 2.0),
        "part_mass_factor": mass_factor,
        "part_mass_bound": c_iv_doc,
        "part_mass_ok": out.constants.get("root_selected", False)
        or mass_factor <= c_iv_doc * (1.0 + 1e-12),
        "overlap_measured": k_measured,
        "overlap_bound": k_doc,
        "overlap_ok": k_measured <= k_doc,
        "part_count": len(out.parts),
    }
    report["all_ok"] = all(report[k] for k in
                           ("cubes_disjoint", "g_inf_ok", "g_p_ok", "chebyshev_ok",
                            "part_mass_ok", "overlap_ok")) and recon_err == 0.0
    return report


def partition_by_radius(out: CZOutput, R: float) -> dict[int, list[int]]:
    """Group part indices by k with 2^k/R <= r_Bj < 2^(k+1)/R.

    Exact at dyadic boundaries: r R = m 2^e with m in [1/2, 1) maps to
    k = e - 1, so a radius of exactly 2^k/R lands in group k.
    """
    if R <= 0:
        raise ValueError(f"R must be positive, got {R}")
    groups: dict[int, list[int]] = {}
    for j, part in enumerate(out.parts):
        mant, expo = math.frexp(part.radius * R)
        k = expo - 1
        groups.setdefault(k, []).append(j)
    return groups


def audit_rows(out: CZOutput, R: float) -> list[dict]:
    """Per-part rows for the audit CSV: j, center, side, r_Bj, mass_p, k_group."""
    groups = partition_by_radius(out, R)
    k_of = {}
    for k, js in groups.items():
        for j in js:
            k_of[j] = k
    rows = []
    for j, part in enumerate(out.parts):
        rows.append({
            "j": j,
            "center": " ".join(repr(float(c)) for c in part.center),
            "side": part.side,
            "r_Bj": part.radius,
            "mass_p": part.mass_p,
            "k_group": k_of[j],
        })
    return rows
