"""Damped-Newton finite-difference solver for sigma_2(D^2 u) = rhs on
boxes with Dirichlet data, plus the transformed-side diagnostics: discrete
superharmonicity of a = (sigma_n/sigma_{n-1})^{1/3}, the Hessian-oscillation
scaling experiment, and the dyadic concentration table.

Each Newton step solves the linear system assembled from
sum_ij F_ij d_ij with F = (tr M) I - M at the current iterate, which is the
exact Jacobian of the discrete residual.  Solutions are kept on the
positive-trace branch; dimensions are capped at n in {2, 3} (dense m^n
lattices).
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.sparse import coo_matrix, diags
from scipy.sparse.linalg import cg, spsolve

from . import tolerances as tol
from .backend import kernels
from .errors import BranchLossError, DomainError, NonConvergenceError, TransformConsistencyError
from .grids import PotentialGrid, boundary_mask, hessian_entries, hessian_matrices
from .legendre import TransformConfig, transform_grid
from .sigma2op import Branch
from .symcore import eigh_sym_batch, eigvals_sym_batch

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SolveReport:
    """Outcome of one Dirichlet solve."""

    iterations: int
    final_residual: float
    min_semiconvexity: float      # min eig of D^2_h u + K I over interior
    branch: Branch
    converged: bool
    residual_history: tuple
    projections: tuple = ()
    mmatrix_violations: int = 0


def isotropic_coefficient(n: int) -> float:
    """t with sigma_2(t I) = 1: t = sqrt(2 / (n (n - 1)))."""
    return math.sqrt(2.0 / (n * (n - 1)))


def quadratic_boundary(n: int):
    t = isotropic_coefficient(n)
    return lambda *coords: (t / 2.0) * sum(c * c for c in coords)


def sin_perturbed_boundary(n: int, extent: float, amplitude: float = 0.1):
    """Quadratic plus amplitude * sin(pi x1/(2R)) sin(pi x2/(2R)).

    Half frequency keeps the perturbation nonzero on the box faces (the
    full-frequency product vanishes on the entire boundary)."""
    quad = quadratic_boundary(n)
    freq = np.pi / (2.0 * extent)

    def g(*coords):
        return quad(*coords) + amplitude * np.sin(freq * coords[0]) * np.sin(freq * coords[1])

    return g


def gauss_perturbed_boundary(n: int, amplitude: float = 0.1):
    """Quadratic plus a fixed bounded bump (not rescaled with the box)."""
    quad = quadratic_boundary(n)

    def g(*coords):
        return quad(*coords) + amplitude * np.exp(-0.5 * sum(c * c for c in coords))

    return g


BOUNDARY_FAMILIES = {
    "quadratic": lambda n, extent, amplitude: quadratic_boundary(n),
    "sin": lambda n, extent, amplitude: sin_perturbed_boundary(n, extent, amplitude),
    "gauss": lambda n, extent, amplitude: gauss_perturbed_boundary(n, amplitude),
}


# ---------------------------------------------------------------------------
# discrete operator pieces
# ---------------------------------------------------------------------------

def sigma2_field(ent: dict, n: int) -> np.ndarray:
    if n == 2:
        return ent[(0, 0)] * ent[(1, 1)] - ent[(0, 1)] ** 2
    if n == 3:
        return (ent[(0, 0)] * ent[(1, 1)] + ent[(0, 0)] * ent[(2, 2)]
                + ent[(1, 1)] * ent[(2, 2)]
                - ent[(0, 1)] ** 2 - ent[(0, 2)] ** 2 - ent[(1, 2)] ** 2)
    raise DomainError("solver supports n in {2, 3}")


def linearization_fields(ent: dict, n: int) -> dict:
    """F = (tr M) I - M entrywise on the interior."""
    trace = sum(ent[(a, a)] for a in range(n))
    out = {}
    for a in range(n):
        out[(a, a)] = trace - ent[(a, a)]
        for b in range(a + 1, n):
            out[(a, b)] = -ent[(a, b)]
    return out


def _interior_linear_indices(n: int, m: int):
    coords = [c.reshape(-1) + 1 for c in np.indices((m - 2,) * n)]
    return coords, np.ravel_multi_index(coords, (m,) * n)


def assemble_weighted_operator(f_fields: dict, n: int, m: int, h: float):
    """Sparse matrix of sum_ab F_ab d_ab with identity rows on the boundary.

    Centered/cross stencils matching hessian_entries, so the matrix is the
    exact Jacobian of the discrete sigma_2 residual."""
    coords, lin_int = _interior_linear_indices(n, m)
    size = m ** n
    rows = []
    cols = []
    vals = []

    def add(offsets, weight):
        nbr = [c.copy() for c in coords]
        for ax, by in offsets:
            nbr[ax] = nbr[ax] + by
        rows.append(lin_int)
        cols.append(np.ravel_multi_index(nbr, (m,) * n))
        vals.append(weight)

    h2 = h * h
    center = np.zeros(lin_int.size)
    for a in range(n):
        faa = f_fields[(a, a)].reshape(-1)
        center -= 2.0 * faa / h2
        add([(a, 1)], faa / h2)
        add([(a, -1)], faa / h2)
    add([], center)
    for a in range(n):
        for b in range(a + 1, n):
            fab = f_fields[(a, b)].reshape(-1)
            w = fab / (2.0 * h2)
            add([(a, 1), (b, 1)], w)
            add([(a, -1), (b, -1)], w)
            add([(a, 1), (b, -1)], -w)
            add([(a, -1), (b, 1)], -w)
    bmask = boundary_mask(n, m).reshape(-1)
    blin = np.flatnonzero(bmask)
    rows.append(blin)
    cols.append(blin)
    vals.append(np.ones(blin.size))
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    vals = np.concatenate(vals)
    return coo_matrix((vals, (rows, cols)), shape=(size, size)).tocsr()


def mmatrix_diagnostic(f_fields: dict, n: int) -> int:
    """Nodes where F is diagonally dominant yet a cross-stencil weight has
    the sign that breaks monotonicity.  Informational only."""
    if n == 1:
        return 0
    diag = np.stack([f_fields[(a, a)].reshape(-1) for a in range(n)])
    offsum = np.zeros_like(diag)
    any_cross = np.zeros(diag.shape[1], dtype=bool)
    for a in range(n):
        for b in range(n):
            if a == b:
                continue
            fab = f_fields[(min(a, b), max(a, b))].reshape(-1)
            offsum[a] += np.abs(fab)
            any_cross |= fab != 0.0
    dominant = (diag >= offsum).all(axis=0)
    return int((dominant & any_cross).sum())


def _solve_linear(mat, rhs, m):
    if m <= tol.LINSOLVE_DIRECT_MAX_M:
        return spsolve(mat.tocsc(), rhs)
    normal = (mat.T @ mat).tocsr()
    diag = normal.diagonal()
    diag[diag == 0.0] = 1.0
    precond = diags(1.0 / diag)
    sol, info = cg(normal, mat.T @ rhs, rtol=tol.LINSOLVE_CG_RTOL, atol=0.0, M=precond, maxiter=20000)
    if info != 0:
        raise NonConvergenceError(f"conjugate gradient failed with info={info}")
    return sol


def _harmonic_extension(boundary_vals: np.ndarray, n: int, m: int, h: float) -> np.ndarray:
    """Discrete harmonic interior fill of boundary data (zero elsewhere)."""
    ident = {}
    shape_int = (m - 2,) * n
    for a in range(n):
        ident[(a, a)] = np.ones(shape_int)
        for b in range(a + 1, n):
            ident[(a, b)] = np.zeros(shape_int)
    mat = assemble_weighted_operator(ident, n, m, h)
    rhs = np.zeros(m ** n)
    bmask = boundary_mask(n, m).reshape(-1)
    rhs[bmask] = boundary_vals.reshape(-1)[bmask]
    return _solve_linear(mat, rhs, m).reshape((m,) * n)


# ---------------------------------------------------------------------------
# the Newton solver
# ---------------------------------------------------------------------------

def _branch_state(grid: PotentialGrid):
    """(min sigma_1, min f_i, min lam) over interior nodes."""
    mats = hessian_matrices(grid)
    evs = eigvals_sym_batch(mats)
    sig1 = evs.sum(axis=1)
    fmin = (sig1 - evs[:, -1]).min()
    return float(sig1.min()), float(fmin), float(evs[:, 0].min())


def branch_projection_coefficient(sig1_min: float, n: int, pad: float = 0.01) -> float:
    """c such that adding c |x|^2 lifts the minimal trace back to the
    branch floor plus pad (the Hessian gains 2c I, the trace 2cn)."""
    return (tol.BRANCH_SIGMA1_FLOOR + pad - sig1_min) / (2.0 * n)


def solve_dirichlet(boundary, extent, m, k_semiconvex, newton_tol=1e-10,
                    max_iter=30, n=2, rhs=None):
    """Solve sigma_2(D^2_h u) = 1 (or = rhs, a manufactured-solution hook)
    on [-R, R]^n with Dirichlet data.

    boundary: callable on coordinate mesh arrays.  Initial guess is the
    isotropic quadratic t|x|^2/2 plus the harmonic extension of the boundary
    mismatch.  Newton steps use the assembled linearization with a halving
    line search; iterates are projected back onto the positive-trace branch
    (by adding c|x|^2) if sigma_1 dips below sqrt(2)/2, and a non-positive
    linearization eigenvalue raises BranchLossError.
    """
    if n not in (2, 3):
        raise DomainError("solver supports n in {2, 3}")
    axes_grid = PotentialGrid.box(n=n, extent=extent, m=m, values=np.zeros((m,) * n))
    mesh = axes_grid.meshgrid()
    h = axes_grid.h
    bvals = np.asarray(boundary(*mesh), dtype=np.float64)
    t_iso = isotropic_coefficient(n)
    quad = (t_iso / 2.0) * sum(c * c for c in mesh)
    ext = _harmonic_extension(bvals - quad, n, m, h)
    u = quad + ext
    bmask = boundary_mask(n, m)
    u[bmask] = bvals[bmask]

    if rhs is None:
        rhs_field = np.ones((m - 2,) * n)
    else:
        interior_mesh = tuple(c[(slice(1, -1),) * n] for c in mesh)
        rhs_field = np.asarray(rhs(*interior_mesh), dtype=np.float64)

    def residual_of(values):
        g = PotentialGrid.box(n=n, extent=extent, m=m, values=values)
        ent = hessian_entries(g)
        return ent, sigma2_field(ent, n) - rhs_field

    projections = []
    mm_violations = 0

    def ensure_branch(values):
        g = PotentialGrid.box(n=n, extent=extent, m=m, values=values)
        sig1_min, f_min, _ = _branch_state(g)
        if sig1_min < tol.BRANCH_SIGMA1_FLOOR:
            c = branch_projection_coefficient(sig1_min, n)
            logger.warning("projecting iterate back onto the positive branch (c=%.3e)", c)
            projections.append(float(c))
            values = values + c * sum(xm * xm for xm in mesh)
            g = PotentialGrid.box(n=n, extent=extent, m=m, values=values)
            sig1_min, f_min, _ = _branch_state(g)
        if f_min <= 0.0:
            raise BranchLossError(f"linearization eigenvalue {f_min:.3e} <= 0 at a node")
        return values

    ent, res = residual_of(u)
    res_norm = float(np.abs(res).max())
    history = [res_norm]
    iterations = 0
    coords, lin_int = _interior_linear_indices(n, m)

    while res_norm > newton_tol and iterations < max_iter:
        u = ensure_branch(u)
        ent, res = residual_of(u)
        res_norm = float(np.abs(res).max())
        if res_norm <= newton_tol:
            break
        f_fields = linearization_fields(ent, n)
        mm_violations += mmatrix_diagnostic(f_fields, n)
        mat = assemble_weighted_operator(f_fields, n, m, h)
        rhs_vec = np.zeros(m ** n)
        rhs_vec[lin_int] = -res.reshape(-1)
        direction = _solve_linear(mat, rhs_vec, m).reshape((m,) * n)
        step = 1.0
        while True:
            trial = u + step * direction
            _, res_trial = residual_of(trial)
            trial_norm = float(np.abs(res_trial).max())
            if trial_norm < res_norm:
                break
            step *= 0.5
            if step < tol.NEWTON_DAMPING_FLOOR:
                raise NonConvergenceError(
                    f"line search fell below the damping floor at residual {res_norm:.3e}",
                    history=history)
        u = trial
        res_norm = trial_norm
        history.append(res_norm)
        iterations += 1

    if res_norm > newton_tol:
        raise NonConvergenceError(
            f"Newton did not reach tol {newton_tol} in {max_iter} iterations "
            f"(residual {res_norm:.3e})", history=history)

    grid = PotentialGrid.box(n=n, extent=extent, m=m, values=u)
    _, final_res = residual_of(u)
    final_norm = float(np.abs(final_res).max())
    evs = eigvals_sym_batch(hessian_matrices(grid))
    sig1 = evs.sum(axis=1)
    branch = Branch.POSITIVE_TRACE if sig1.min() > 0.0 else Branch.NEGATIVE_TRACE
    report = SolveReport(
        iterations=iterations,
        final_residual=final_norm,
        min_semiconvexity=float(evs[:, 0].min() + k_semiconvex),
        branch=branch,
        converged=True,
        residual_history=tuple(history),
        projections=tuple(projections),
        mmatrix_violations=mm_violations,
    )
    return grid, report


# ---------------------------------------------------------------------------
# transformed-side diagnostics
# ---------------------------------------------------------------------------

def interior_grid(of: PotentialGrid, values: np.ndarray) -> PotentialGrid:
    """Grid over the interior nodes of `of` carrying `values`."""
    axes = tuple((lo + h, hi - h) for (lo, hi), h in zip(of.axes, of.spacings))
    return PotentialGrid(n=of.n, m=of.m - 2, axes=axes, values=values)


def superharmonic_fields(w: PotentialGrid, cfg: TransformConfig) -> dict:
    """Nodal mu, a and the linearization matrices H = sigma_n(mu) G of the
    image equation, for the superharmonicity check.

    mu and the H, G matrices come from D^2_h w.  The nodal a prefers the
    grid transform's source-trace payload (a = (sum_i 1/mu_i)^{-1/3} read
    off the smooth source lattice via the trace identity); differencing the
    conjugated values twice would inject node-scale jumps that do not
    vanish under refinement once differenced twice more."""
    n = w.n
    mats = hessian_matrices(w)
    mu, vecs = eigh_sym_batch(mats)
    if mu.min() < -tol.MU_RANGE_TOL or mu.max() > 1.0 + tol.MU_RANGE_TOL:
        raise TransformConsistencyError(
            f"transformed Hessian eigenvalues left (0,1): range "
            f"[{mu.min():.3e}, {mu.max():.3e}]")
    mu = np.clip(mu, 1e-14, None)
    shape = (w.m - 2,) * n
    aux = w.aux or {}
    if "source_trace" in aux:
        trace = aux["source_trace"][(slice(1, -1),) * n]
        a_field = trace ** (-1.0 / 3.0)
    else:
        e = kernels.esp_batch(mu)
        a_field = np.cbrt(e[:, n] / e[:, n - 1]).reshape(shape)
    if "source_hessian" in aux:
        src = aux["source_hessian"][(slice(1, -1),) * n].reshape(-1, n, n)
        rho, hvecs = eigh_sym_batch(src)
        hmu = 1.0 / rho                       # eigenpairs of D^2 w, unsorted
    else:
        hmu, hvecs = mu, vecs
    sig_n = np.prod(hmu, axis=1)
    nu = 1.0 / hmu - cfg.kbar
    g_eigs = (nu.sum(axis=1)[:, None] - nu) / (hmu * hmu)
    g_mats = np.einsum("bik,bk,bjk->bij", hvecs, g_eigs, hvecs)
    h_mats = sig_n[:, None, None] * g_mats
    return {
        "mu": mu, "a": a_field.reshape(shape),
        "G": g_mats, "H": h_mats, "sigma_n": sig_n,
    }


def superharmonicity_residual(w: PotentialGrid, cfg: TransformConfig,
                              return_diagnostics: bool = False):
    """Discrete Delta_H a over the deep interior of the image grid.

    The continuum quantity is <= 0; discretization noise is O(h), so the
    check is that positive parts vanish under refinement.  Also evaluates
    the proportionality Delta_H a = sigma_n(mu) Delta_G a node by node
    (two assembly routes for the same pairing)."""
    fields = superharmonic_fields(w, cfg)
    a_grid = interior_grid(w, fields["a"])
    ent = hessian_entries(a_grid)
    n = w.n
    deep_shape = ent[(0, 0)].shape
    inner = (slice(1, -1),) * n
    hmats = fields["H"].reshape((w.m - 2,) * n + (n, n))[inner]
    gmats = fields["G"].reshape((w.m - 2,) * n + (n, n))[inner]
    signs = fields["sigma_n"].reshape((w.m - 2,) * n)[inner]
    lap_h = np.zeros(deep_shape)
    lap_g = np.zeros(deep_shape)
    for a in range(n):
        lap_h += hmats[..., a, a] * ent[(a, a)]
        lap_g += gmats[..., a, a] * ent[(a, a)]
        for b in range(a + 1, n):
            lap_h += 2.0 * hmats[..., a, b] * ent[(a, b)]
            lap_g += 2.0 * gmats[..., a, b] * ent[(a, b)]
    if not return_diagnostics:
        return lap_h
    prop_dev = float(np.abs(lap_h - signs * lap_g).max())
    prop_scale = 1.0 + float(np.abs(lap_h).max())
    return lap_h, {
        "proportionality_dev": prop_dev,
        "proportionality_scale": prop_scale,
        "a": fields["a"],
        "max_positive": float(np.maximum(lap_h, 0.0).max()),
    }


@dataclass(frozen=True)
class ScalingRow:
    extent: float
    osc: float
    osc_entries: tuple
    iterations: int
    residual: float


@dataclass(frozen=True)
class ScalingResult:
    rows: tuple
    alpha_hat: float
    strictly_decreasing: bool


def hessian_oscillation(w: PotentialGrid) -> tuple:
    """(max over entries, per-entry max-min) of D^2_h w over the central
    half-box of the image grid."""
    ent = hessian_entries(w)
    m = w.m
    start = max((m - 1) // 4, 1)
    stop = m - 1 - start
    sel = (slice(start - 1, stop - 1 + 1),) * w.n   # interior-field indexing
    oscs = []
    for key in sorted(ent):
        block = ent[key][sel]
        oscs.append(float(block.max() - block.min()))
    return max(oscs), tuple(oscs)


def scaling_experiment(base_boundary, extents, m, k_semiconvex, n=2,
                       newton_tol=1e-10, max_iter=30, keep_grids=False):
    """Solve on growing boxes with a fixed boundary perturbation, transform,
    and tabulate the Hessian oscillation of the image over half-boxes.

    The fitted exponent alpha_hat is the least-squares slope of
    -log osc vs log R; the rigidity mechanism predicts alpha_hat > 0 with
    osc non-increasing."""
    extents = list(extents)
    if any(b >= a for a, b in zip(extents[1:], extents[:-1])):
        raise DomainError("extents must increase strictly")
    cfg = TransformConfig(n=n, K=k_semiconvex)
    rows = []
    grids = []
    for extent in extents:
        grid, report = solve_dirichlet(base_boundary, extent, m, k_semiconvex,
                                       newton_tol=newton_tol, max_iter=max_iter, n=n)
        image = transform_grid(grid, cfg)
        osc, per_entry = hessian_oscillation(image)
        rows.append(ScalingRow(extent=float(extent), osc=osc, osc_entries=per_entry,
                               iterations=report.iterations, residual=report.final_residual))
        if keep_grids:
            grids.append((grid, image))
    logs = np.log([max(r.osc, 1e-300) for r in rows])
    slope = float(np.polyfit(np.log([r.extent for r in rows]), logs, 1)[0])
    decreasing = all(b.osc < a.osc for a, b in zip(rows, rows[1:]))
    result = ScalingResult(rows=tuple(rows), alpha_hat=-slope, strictly_decreasing=decreasing)
    if keep_grids:
        return result, grids
    return result


def concentration_diagnostic(w: PotentialGrid, cfg: TransformConfig,
                             xi: float, levels: int) -> list:
    """Dyadic sub-box table for the superharmonic quantity a: per level k,
    the minimum a_k and the fraction of nodes with a > a_k + xi.
    Descriptive only; levels truncate below 5 nodes per axis."""
    if xi <= 0.0:
        raise DomainError("xi must be positive")
    fields = superharmonic_fields(w, cfg)
    a = fields["a"]
    size = a.shape[0]
    center = (size - 1) / 2.0
    table = []
    for k in range(levels + 1):
        span = (size - 1) / 2.0 * (0.5 ** k)
        lo = int(math.ceil(center - span))
        hi = int(math.floor(center + span))
        nodes = hi - lo + 1
        if nodes < 5:
            import warnings
            warnings.warn(f"concentration level {k} truncated: {nodes} nodes per axis")
            break
        block = a[(slice(lo, hi + 1),) * w.n]
        a_k = float(block.min())
        bad = float((block > a_k + xi).mean())
        table.append({"level": k, "nodes_per_axis": nodes, "a_min": a_k, "bad_fraction": bad})
    return table
