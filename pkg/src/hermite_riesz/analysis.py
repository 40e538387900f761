"""Norms, operator-norm estimators, and the quantitative experiment sweeps.

Conventions used throughout:

* Weak-L^p quasi-norms are exact on grid simple functions: sorting |values|
  with their cell measures attains the sup at a sample level.
* Operator norms from L^p (p > 2' side) are reported as test-family lower
  bounds; the p = 1 -> L^2 norms of shell projections are exact, via the
  kernel diagonal sup_y sqrt(Phi_k(y, y)).
* Level-set measures use quadrature cell measures on spectral-side grids
  and uniform cell measures on the dyadic side, never mixed in one norm.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .basis import TensorGrid, hermite_values, shell_dim, tensor_quadrature_grid
from .cz import CZOutput, CZPart, ball_volume, cz_decompose, partition_by_radius
from .decomp import decompose_large_k
from .transform import (
    CoeffRep,
    GridFunction,
    MultiplierSpec,
    analyze,
    apply_multiplier,
    bochner_riesz_spec,
    critical_index,
    eigenvalue,
    gamma_index,
    multiplier_kernel,
    projection_kernel_diag,
    synthesize,
)

__all__ = [
    "NormReport",
    "SweepResult",
    "weak_lp_quasinorm",
    "level_set_measure",
    "loglog_slope",
    "restriction_norm_exact",
    "restriction_constant_sweep",
    "resolvent_multiplier",
    "apriori_constant",
    "fs_support_check",
    "weak_type_sweep",
    "convergence_sweep",
    "nk_bj_bound_check",
    "proof_trace",
    "standard_test_family",
    "square_function_bound_check",
]


@dataclass(frozen=True)
class NormReport:
    value: float
    method: str  # "exact-kernel" | "test-family lower bound" | "sorted-level-set"
    family_size: int = 0

    def __post_init__(self):
        if not (np.isfinite(self.value) and self.value >= 0):
            raise ValueError(f"norm value must be finite and >= 0, got {self.value}")


@dataclass
class SweepResult:
    axis: np.ndarray
    values: np.ndarray
    reference_exponent: float
    fitted_constant: float
    extras: dict = field(default_factory=dict)

    def ratios(self) -> np.ndarray:
        ref = np.asarray(self.axis, dtype=float) ** self.reference_exponent
        return np.asarray(self.values) / ref


def weak_lp_quasinorm(f: GridFunction, p: float) -> NormReport:
    """sup over heights of height * measure{|f| > height}^(1/p), exact on the grid."""
    if p < 1:
        raise ValueError(f"exponent must be >= 1, got {p}")
    v = np.abs(np.asarray(f.values)).ravel()
    w = f.grid.measures().ravel()
    order = np.argsort(v)[::-1]
    v, w = v[order], np.cumsum(w[order])
    # measure{|f| > a} for a just below v[i] includes all ties, so taking the
    # max over every index (ties included via the running cumsum) attains the sup
    val = float(np.max(v * w ** (1.0 / p))) if v.size else 0.0
    return NormReport(value=val, method="sorted-level-set")


def level_set_measure(f: GridFunction, height: float) -> float:
    w = f.grid.measures()
    return float(np.sum(w[np.abs(f.values) > height]))


def loglog_slope(x, y) -> float:
    x = np.asarray(x, dtype=float)
    y = np.maximum(np.asarray(y, dtype=float), 1e-300)
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


# ---------------------------------------------------------------------------
# restriction-type sweep: exact ||P_k||_{1->2} = sup_y sqrt(Phi_k(y,y))
# ---------------------------------------------------------------------------

def _origin_shell_weights(n_rest: int, k_max: int) -> np.ndarray:
    """w[m] = sum over beta in N^n_rest, |beta| = m, of prod h_beta(0)^2."""
    z = hermite_values(k_max, np.array([0.0]))[:, 0] ** 2
    if n_rest == 0:
        w = np.zeros(k_max + 1)
        w[0] = 1.0
        return w
    w = z.copy()
    for _ in range(n_rest - 1):
        new = np.zeros_like(w)
        for m in range(k_max + 1):
            new[m] = np.dot(w[: m + 1], z[m::-1])
        w = new
    return w


def restriction_norm_exact(n: int, k: int, refine: bool = True) -> float:
    """Exact L^1 -> L^2 norm of the shell-k projection.

    The kernel diagonal is rotation invariant (the shell eigenspace is), so
    the sup over R^n reduces to a radial scan out past the classical
    turning radius sqrt(2k+n), followed by a local refinement.
    """
    lam2 = 2.0 * k + n
    r_max = math.sqrt(lam2) + 4.0
    # resolve the fastest radial oscillation ~ pi / sqrt(2k+n)
    step = min(0.02, 0.3 / math.sqrt(lam2))
    r = np.arange(0.0, r_max, step)
    w_rest = _origin_shell_weights(n - 1, k)
    sq = hermite_values(k, r) ** 2
    phi = np.einsum("jp,j->p", sq[: k + 1], w_rest[k::-1])
    i = int(np.argmax(phi))
    best = float(phi[i])
    if refine and 0 < i < r.size - 1:
        rr = np.linspace(r[i - 1], r[i + 1], 81)
        sq = hermite_values(k, rr) ** 2
        phir = np.einsum("jp,j->p", sq[: k + 1], w_rest[k::-1])
        best = max(best, float(np.max(phir)))
    return math.sqrt(best)


def restriction_constant_sweep(n: int, ks, p: float = 1.0) -> SweepResult:
    """Shell-projection norms against the reference growth k^((delta(p)-1/2)/2).

    Exact kernel mode is available for p = 1 only; the reference exponent
    at p = 1 is (n-2)/4.
    """
    if p != 1.0:
        raise ValueError("exact kernel mode needs p = 1; use a test family otherwise")
    ks = np.asarray(list(ks), dtype=int)
    if np.any(ks < 1):
        raise ValueError("sweep needs shells k >= 1 (k = 0 has no reference power)")
    vals = np.array([restriction_norm_exact(n, int(k)) for k in ks])
    expo = (critical_index(n, p) - 0.5) / 2.0
    ratios = vals / ks.astype(float) ** expo
    return SweepResult(axis=ks.astype(float), values=vals, reference_exponent=expo,
                       fitted_constant=float(np.max(ratios)),
                       extras={"ratio_max_over_min": float(np.max(ratios) / np.min(ratios))})


# ---------------------------------------------------------------------------
# a priori resolvent-power bound, L^2 -> weak-L^p
# ---------------------------------------------------------------------------

def resolvent_multiplier(gamma: float) -> MultiplierSpec:
    """F(lambda) = (1 + lambda^2)^(-gamma/2), the fractional resolvent power."""
    return MultiplierSpec(
        eval=lambda lam: (1.0 + np.asarray(lam, dtype=float) ** 2) ** (-gamma / 2.0),
        is_even=True, name=f"resolvent(gamma={gamma:g})")


def apriori_constant(n: int, p: float, family: list[tuple[str, CoeffRep]],
                     grid: TensorGrid) -> NormReport:
    """Test-family lower bound for the L^2 -> weak-L^p resolvent-power norm."""
    if not family:
        raise ValueError("empty test family")
    gam = gamma_index(n, p)
    spec = resolvent_multiplier(gam)
    best = 0.0
    for _name, c in family:
        denom = c.norm2()
        if denom == 0.0:
            continue
        out = synthesize(apply_multiplier(spec, c), grid)
        best = max(best, weak_lp_quasinorm(out, p).value / denom)
    return NormReport(value=best, method="test-family lower bound",
                      family_size=len(family))


# ---------------------------------------------------------------------------
# finite-speed support check for band-limited multiplier kernels
# ---------------------------------------------------------------------------

def fs_support_check(spec: MultiplierSpec, k_list, grid: TensorGrid,
                     tail_tol: float = 2.0) -> SweepResult:
    """Off-diagonal kernel mass beyond the declared transform radius.

    leakage(K) = (sum over |x-y| > r of |K_F|^2 dm dm) / total, which must
    shrink as the truncation grows; exact support holds only in the limit.
    Rejects profiles that do not declare a transform radius.  The spectral
    tail gate is lenient here on purpose: partial-sum truncation is the very
    thing the sweep measures, so only genuinely non-decaying profiles are
    turned away.
    """
    r = spec.fourier_support_radius
    if r is None:
        raise ValueError("profile declares no transform support radius; "
                         "the support check does not apply")
    if not spec.is_even:
        raise ValueError("support check needs an even profile")
    leak = []
    for K in k_list:
        km = multiplier_kernel(spec, grid, int(K), tail_tol=tail_tol)
        pts, m = km.points, km.measures
        d = np.sqrt(np.sum((pts[:, None, :] - pts[None, :, :]) ** 2, axis=-1))
        mass = np.abs(km.matrix) ** 2 * np.outer(m, m)
        total = float(np.sum(mass))
        outside = float(np.sum(mass[d > r]))
        leak.append(outside / total if total else 0.0)
    ks = np.asarray(list(k_list), dtype=float)
    return SweepResult(axis=ks, values=np.array(leak), reference_exponent=0.0,
                       fitted_constant=float(leak[-1]),
                       extras={"radius": r,
                               "non_increasing": bool(np.all(np.diff(leak) <= 1e-12))})


# ---------------------------------------------------------------------------
# weak-type uniformity and convergence sweeps
# ---------------------------------------------------------------------------

def weak_type_sweep(n: int, p: float, r_values, family: list[tuple[str, CoeffRep]],
                    grid: TensorGrid, delta: float | None = None,
                    slope_threshold: float = 0.1) -> SweepResult:
    """Family-max ratios ||S_R f||_{p,inf} / ||f||_p over R, with a verdict.

    Uniform boundedness shows up as a log-log slope <= slope_threshold of
    ratio against R (bounded tolerates noise, polynomial growth does not).
    """
    rs = np.asarray(sorted(float(R) for R in r_values))
    if rs.size == 0 or rs[0] <= 0:
        raise ValueError("need positive R values")
    if delta is None:
        delta = critical_index(n, p)
    if not family:
        raise ValueError("empty test family")
    k_max = min(c.k_max for _n, c in family)
    needed = int(math.ceil((rs[-1] ** 2 - n) / 2.0))
    if needed > k_max:
        raise ValueError(
            f"R={rs[-1]:g} needs shells up to {needed} but the family is "
            f"represented to k_max={k_max}")
    synth_cache = [(name, c, synthesize(c, grid)) for name, c in family]
    ratios = []
    per_member = {}
    for R in rs:
        spec = bochner_riesz_spec(R, delta)
        worst = 0.0
        for name, c, f_grid in synth_cache:
            fp = f_grid.lp_norm(p)
            if fp == 0.0:
                continue
            out = synthesize(apply_multiplier(spec, c), grid)
            ratio = weak_lp_quasinorm(out, p).value / fp
            per_member.setdefault(name, []).append(ratio)
            worst = max(worst, ratio)
        ratios.append(worst)
    ratios = np.array(ratios)
    slope = loglog_slope(rs, ratios)
    return SweepResult(
        axis=rs, values=ratios, reference_exponent=0.0,
        fitted_constant=float(np.max(ratios)),
        extras={
            "delta": delta,
            "slope": slope,
            "uniform": bool(slope <= slope_threshold),
            "max_over_min": float(np.max(ratios) / np.min(ratios)),
            "per_member": per_member,
        })


def convergence_sweep(c: CoeffRep, p: float, r_values, grid: TensorGrid,
                      delta: float | None = None) -> SweepResult:
    """Weak-L^p error of the summation method against R on a band-limited input.

    Two routes compute the error function: applying the multiplier then
    subtracting on the grid, and synthesizing the coefficient-space defect
    (F(lambda_k) - 1) c_k directly.  They must agree to roundoff; the
    defect route's values are reported.
    """
    rs = np.asarray(sorted(float(R) for R in r_values))
    n = c.dim
    if delta is None:
        delta = critical_index(n, p)
    f_grid = synthesize(c, grid)
    vals = []
    route_dev = 0.0
    defects = []
    for R in rs:
        spec = bochner_riesz_spec(R, delta)
        lam = np.sqrt(c.eigenvalues())
        dvals = spec(lam) - 1.0
        defect = CoeffRep(n, c.k_max, [dvals[k] * s for k, s in enumerate(c.shells)])
        err_b = synthesize(defect, grid)
        err_a = synthesize(apply_multiplier(spec, c), grid).values - f_grid.values
        route_dev = max(route_dev, float(np.max(np.abs(err_a - err_b.values))))
        vals.append(weak_lp_quasinorm(err_b, p).value)
        defects.append(float(np.max(np.abs(dvals))))
    vals = np.array(vals)
    top = float(c.eigenvalues()[max(
        (k for k in range(c.k_max + 1) if np.any(c.shells[k] != 0)), default=0)])
    past = rs**2 > top
    mono = bool(np.all(np.diff(vals[past]) <= 1e-12)) if past.sum() >= 2 else True
    return SweepResult(
        axis=rs, values=vals, reference_exponent=0.0,
        fitted_constant=float(np.max(vals)) if vals.size else 0.0,
        extras={
            "delta": delta,
            "route_deviation": route_dev,
            "multiplier_defect": np.array(defects),
            "top_eigenvalue": top,
            "monotone_past_band": mono,
        })


# ---------------------------------------------------------------------------
# the single-part kernel bound and the three-range tail sum
# ---------------------------------------------------------------------------

def nk_bj_bound_check(k: int, part: CZPart, R: float, p: float, n: int,
                      alpha: float, grid: TensorGrid, M: int = 8,
                      shell_cap: int | None = None) -> dict:
    """Coefficient-space check of ||n_k(sqrt H) b_j||_2 for one localized part.

    Measures the ratio against alpha |B_j|^(1/2) max(2^(k/2)/R, 1) and
    evaluates the three-range split of the restriction-bound tail sum with
    the envelope exponent N = 2M, reporting fitted constants for the case
    formula (2^k/R)^(2n(1/2-1/p)) max(1, 2^k/R^2).
    """
    if k < 1:
        raise ValueError("bound check applies to scales k >= 1")
    delta = critical_index(n, p)
    if shell_cap is None:
        shell_cap = int(math.ceil(4.0 * R * R)) + 8
    b = GridFunction(grid, part.scatter(grid.shape))
    c = analyze(b, shell_cap, require_quadrature=False)
    pieces = decompose_large_k(R, delta, k, M)
    lam = np.sqrt(c.eigenvalues())
    nk_vals = pieces.n_k(lam)
    shell_l2 = np.array([float(np.dot(s, s)) for s in c.shells])
    norm_nk_b = math.sqrt(float(np.sum(nk_vals**2 * shell_l2)))

    bj_p = float(np.sum(np.abs(part.block) ** p)
                 * np.prod([w[0] for w in grid.axis_weights])) ** (1.0 / p)
    ball = ball_volume(n, part.radius)
    scale = alpha * math.sqrt(ball) * max(2.0 ** (k / 2.0) / R, 1.0)
    measured_c = norm_nk_b / scale if scale else math.inf

    # three-range envelope sum at N = 2M, in the integer spectral variable
    N = 2 * M
    ells = np.arange(1, shell_cap + 1, dtype=float)
    terms = (2.0 ** (-2 * delta * k)
             * (1.0 + 2.0**k * np.abs(np.sqrt(ells) / R - 1.0)) ** (-2 * N)
             * ells ** (delta - 0.5))
    lo = R * R * (1.0 - 2.0**-k) ** 2 - 1.0
    hi = R * R * (1.0 + 2.0**-k) ** 2 + 1.0
    in_i = (ells > lo) & (ells < hi)
    in_ii = ells >= hi
    in_iii = ells <= lo
    s_i, s_ii, s_iii = (float(np.sum(terms[m])) for m in (in_i, in_ii, in_iii))
    case = (2.0**k / R) ** (2 * n * (0.5 - 1.0 / p)) * max(1.0, 2.0**k / R**2)
    plain = (2.0**k / R) ** (2 * n * (0.5 - 1.0 / p))
    return {
        "k": k,
        "R": R,
        "norm_nk_b": norm_nk_b,
        "bj_p": bj_p,
        "ball_volume": ball,
        "bound_scale": scale,
        "measured_constant": measured_c,
        "sum_i": s_i,
        "sum_ii": s_ii,
        "sum_iii": s_iii,
        "case_value": case,
        "sum_i_fitted": s_i / case if case else math.inf,
        "sum_ii_fitted": s_ii / plain if plain else math.inf,
        "sum_iii_fitted": s_iii / plain if plain else math.inf,
        "regime": "2^k > R^2" if 2.0**k > R * R else "2^k <= R^2",
        "shell_cap": shell_cap,
    }


# ---------------------------------------------------------------------------
# the full pipeline trace
# ---------------------------------------------------------------------------

def proof_trace(f: GridFunction, alpha: float, R: float, p: float,
                k_max: int, delta: float | None = None) -> dict:
    """Run the whole splitting pipeline and measure every level-set budget.

    Decomposes f at the given height, groups the localized parts by the
    scale of their support against 1/R, pushes the three branches through
    the summation operator, and compares each level-set measure (and the
    union of dilated balls) to the common budget alpha^-p ||f||_p^p.
    """
    n = f.grid.dim
    if delta is None:
        delta = critical_index(n, p)
    out = cz_decompose(f, alpha, p)
    groups = partition_by_radius(out, R)
    shape = f.grid.shape
    h1 = np.zeros(shape)
    h2 = np.zeros(shape)
    for k, js in groups.items():
        target = h1 if k <= 0 else h2
        for j in js:
            target[out.parts[j].slices] += out.parts[j].block
    cell_vol = float(np.prod([w[0] for w in f.grid.axis_weights]))
    fp_p = float(np.sum(np.abs(f.values) ** p) * cell_vol)
    budget = fp_p / alpha**p

    spec = bochner_riesz_spec(R, delta)
    branches = {}
    for name, vals in (("g", out.g.values), ("h1", h1), ("h2", h2)):
        gf = GridFunction(f.grid, vals)
        c = analyze(gf, k_max, require_quadrature=False)
        s = synthesize(apply_multiplier(spec, c), f.grid)
        meas = level_set_measure(s, alpha)
        branches[name] = {
            "level_set_measure": meas,
            "budget": budget,
            "fitted_constant": meas / budget if budget else 0.0,
            "l2_in": float(np.sqrt(np.sum(np.abs(vals) ** 2) * cell_vol)),
            "l2_out": float(np.sqrt(np.sum(np.abs(s.values) ** 2) * cell_vol)),
        }
    # spectral contraction and the chebyshev chain for the bounded branch
    g2 = branches["g"]["l2_in"]
    branches["g"]["chebyshev_bound"] = (g2 / alpha) ** 2
    branches["g"]["chebyshev_ok"] = (
        branches["g"]["level_set_measure"] <= (g2 / alpha) ** 2 * (1 + 1e-9))
    branches["g"]["l2_contraction_ok"] = (
        branches["g"]["l2_out"] <= g2 * (1 + 1e-9))

    pts = f.grid.points()
    hit = np.zeros(pts.shape[0], dtype=bool)
    for part in out.parts:
        d2 = np.sum((pts - part.center) ** 2, axis=1)
        hit |= d2 <= (4.0 * part.radius) ** 2 + 1e-12
    omega_star = float(np.sum(hit) * cell_vol)
    sum_balls = sum(pt.ball_volume() for pt in out.parts)
    return {
        "alpha": alpha,
        "R": R,
        "p": p,
        "delta": delta,
        "part_count": len(out.parts),
        "groups": {int(k): len(v) for k, v in groups.items()},
        "f_p_norm_p": fp_p,
        "budget": budget,
        "branches": branches,
        "omega_star": omega_star,
        "sum_ball_volumes": sum_balls,
        "omega_star_fitted": omega_star / budget if budget else 0.0,
        "omega_star_vs_balls": omega_star / sum_balls if sum_balls else 0.0,
        "cz_constants": out.constants,
    }


# ---------------------------------------------------------------------------
# the fixed, versioned test family
# ---------------------------------------------------------------------------

def standard_test_family(n: int, k_max: int, grid: TensorGrid,
                         seed: int = 0) -> list[tuple[str, CoeffRep]]:
    """Deterministic family: Gaussians (5 centers x 3 widths), single-shell
    functions at k in {1,4,16,64}, random band functions (3 seeds), and one
    sharp bump at the classical turning radius of shell 64.
    """
    rng = np.random.default_rng(seed)
    fam: list[tuple[str, CoeffRep]] = []
    mesh = grid.meshgrid()
    centers = [np.zeros(n)]
    for d in range(min(n, 2)):
        for s in (+1.0, -1.0):
            cvec = np.zeros(n)
            cvec[d] = 1.5 * s
            centers.append(cvec)
    centers = centers[:5]
    widths = (0.5, 1.0, 2.0)
    for ci, cen in enumerate(centers):
        for wi, wid in enumerate(widths):
            q = sum((mesh[d] - cen[d]) ** 2 for d in range(n))
            f = GridFunction(grid, np.exp(-q / (2.0 * wid**2)))
            fam.append((f"gauss_c{ci}_w{wi}", analyze(f, k_max)))
    for k in (1, 4, 16, 64):
        if k > k_max:
            continue
        c = CoeffRep.zeros(n, k_max)
        vals = rng.standard_normal(shell_dim(n, k))
        c.shells[k][:] = vals / np.linalg.norm(vals)
        fam.append((f"shell_{k}", c))
    band = min(40, k_max)
    for s in range(3):
        c = CoeffRep.zeros(n, k_max)
        for k in range(band + 1):
            c.shells[k][:] = rng.standard_normal(shell_dim(n, k))
        scale = c.norm2()
        for k in range(band + 1):
            c.shells[k] /= scale
        fam.append((f"band_{s}", c))
    k_edge = min(64, k_max)
    r_turn = math.sqrt(eigenvalue(n, k_edge))
    cen = np.zeros(n)
    cen[0] = r_turn
    q = sum((mesh[d] - cen[d]) ** 2 for d in range(n))
    f = GridFunction(grid, np.exp(-q / (2.0 * 0.3**2)))
    fam.append(("edge_bump", analyze(f, k_max)))
    return fam


def square_function_bound_check(n: int, k_max: int, trials: int = 100,
                                profiles: int = 6, seed: int = 0) -> dict:
    """Almost-orthogonality inequality for profile families acting on sqrt(H):

    with A = sup over the truncated spectrum of sum_i Q_i(lambda)^2,
    || sum_i Q_i(sqrt H) f_i ||_2^2 <= A * sum_i ||f_i||_2^2 must hold for
    every batch of coefficient vectors; checked on random batches through
    the actual multiplier path.
    """
    rng = np.random.default_rng(seed)
    lam = np.sqrt(eigenvalue(n, np.arange(k_max + 1)))
    worst = 0.0
    for _ in range(trials):
        qs = np.array([
            rng.uniform(0.5, 2.0) * np.exp(-rng.uniform(0.3, 3.0)
                                           * (lam - rng.uniform(0, 5)) ** 2)
            + 0.1 * rng.standard_normal()
            for _i in range(profiles)
        ])
        a_const = float(np.max(np.sum(qs**2, axis=0)))
        total = CoeffRep.zeros(n, k_max)
        rhs = 0.0
        for i in range(profiles):
            f_i = CoeffRep(n, k_max, [rng.standard_normal(shell_dim(n, k))
                                      for k in range(k_max + 1)])
            rhs += f_i.norm2() ** 2
            row = qs[i]
            spec = MultiplierSpec(eval=lambda x, row=row: np.interp(x, lam, row),
                                  name=f"profile_{i}")
            out = apply_multiplier(spec, f_i)
            for k in range(k_max + 1):
                total.shells[k] += out.shells[k]
        lhs = total.norm2() ** 2
        worst = max(worst, lhs / (a_const * rhs) if rhs else 0.0)
    return {"worst_ratio": worst, "ok": worst <= 1.0 + 1e-12, "trials": trials}
