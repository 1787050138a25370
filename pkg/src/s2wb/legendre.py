"""Legendre-Lewy transform and the uniformly elliptic image equation.

Shifting u by Kbar |x|^2 / 2 and taking the convex conjugate sends the
Hessian spectrum lam to mu_i = 1/(lam_i + Kbar) in (0, 1).  On the
constraint set sigma_2(lam) = 1 the image potential satisfies

    -sigma_{n-2}(mu) + A1 sigma_{n-1}(mu) - A2 sigma_n(mu) = 0,
    A1 = (n-1) Kbar,  A2 = n(n-1) Kbar^2 / 2 - 1,

equivalently q(mu) = sigma_{n-1}/sigma_{n-2} = (A1 - A2 a^3)^{-1} with
a = (sigma_n/sigma_{n-1})^{1/3}; q is uniformly elliptic and concave on the
relevant eigenvalue rectangle.  The grid-level transform uses the
linear-time discrete conjugate with a local quadratic refinement of the
argmax so that discrete Hessians of the image converge.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tolerances as tol
from .backend import kernels
from .errors import (
    ConvexityError,
    DomainError,
    NumericalError,
    SingularityError,
    TransformDomainError,
)
from .grids import PotentialGrid, gradient_fields, hessian_entries, hessian_matrices
from .symcore import Spectrum, eigvals_sym_batch, quotient


def default_kbar(k_floor: float) -> tuple:
    """Kbar = max(8K/3, K + 1 + 1e-6) and the rule that fired.

    8K/3 alone drops below K + 1 for K <= 3/5, which would break the
    mu < 1 bound; the floor keeps Kbar - K > 1 for every K."""
    lewy = 8.0 * k_floor / 3.0
    floor = k_floor + 1.0 + 1e-6
    if lewy >= floor:
        return lewy, "8K/3"
    return floor, "K+1"


@dataclass(frozen=True)
class TransformConfig:
    """Shift Kbar, certificate shift J = n Kbar, and the image-equation
    coefficients A1, A2; Kbar > K is required for a well-defined image."""

    n: int
    K: float
    kbar: float = None
    kbar_rule: str = "explicit"

    def __post_init__(self):
        if self.n < 2:
            raise DomainError("transform needs n >= 2")
        if not self.K > 0.0:
            raise DomainError("semiconvexity constant K must be positive")
        if self.kbar is None:
            kbar, rule = default_kbar(self.K)
            object.__setattr__(self, "kbar", kbar)
            object.__setattr__(self, "kbar_rule", rule)
        if not self.kbar > self.K:
            raise DomainError(f"Kbar = {self.kbar!r} must exceed K = {self.K!r}")

    @property
    def J(self) -> float:
        return self.n * self.kbar

    @property
    def A1(self) -> float:
        return (self.n - 1) * self.kbar

    @property
    def A2(self) -> float:
        return self.n * (self.n - 1) * self.kbar ** 2 / 2.0 - 1.0


@dataclass(frozen=True)
class TransformedState:
    """Image of one spectrum: mu ascending, the superharmonic quantity a,
    the Hessian quotient q, and the image-equation residual."""

    mu: Spectrum
    a: float
    q: float
    residual: float

    def __post_init__(self):
        m = self.mu.values
        if not (m > 0.0).all() or not (m < 1.0).all():
            raise TransformDomainError("transformed eigenvalues must lie in (0, 1)")
        recip = float((1.0 / m).sum())
        if abs(self.a ** 3 * recip - 1.0) > tol.RECIPROCAL_IDENTITY:
            raise NumericalError("a^3 * sum(1/mu) = 1 identity failed")


def transform_spectrum(lam, cfg: TransformConfig) -> TransformedState:
    """mu_i = 1/(lam_i + Kbar); residual of the image equation is
    sigma_n(mu) (1 - sigma_2(lam)), zero on the constraint set."""
    values = lam.values if isinstance(lam, Spectrum) else np.asarray(lam, dtype=np.float64)
    if values.size != cfg.n:
        raise DomainError(f"expected {cfg.n} eigenvalues")
    out = batch_transform(values[None, :], cfg)
    mu = Spectrum(out["mu"][0])
    return TransformedState(mu=mu, a=float(out["a"][0]), q=float(out["q"][0]),
                            residual=float(out["residual"][0]))


def batch_transform(lams: np.ndarray, cfg: TransformConfig) -> dict:
    """Vectorized transform of (B, n) spectra.

    Returns mu (ascending), esp of mu, a, q, residual, the factorization
    check |sigma_n (sigma_2(lam) - 1) + residual|, the trace-identity error
    and the on-manifold quotient-identity error."""
    lams = np.asarray(lams, dtype=np.float64)
    b, n = lams.shape
    if n != cfg.n:
        raise DomainError(f"expected spectra of length {cfg.n}")
    shifted = lams + cfg.kbar
    if (shifted <= 0.0).any():
        bad = int(np.argmax((shifted <= 0.0).any(axis=1)))
        raise TransformDomainError(
            f"eigenvalue {lams[bad].min()!r} <= -Kbar = {-cfg.kbar!r}; image undefined")
    mu = np.sort(1.0 / shifted, axis=1)
    e = kernels.esp_batch(mu)
    sig_n = e[:, n]
    sig_n1 = e[:, n - 1]
    sig_n2 = e[:, n - 2]
    if (np.abs(sig_n1) <= tol.SIGMA_DENOM_FLOOR).any() or (np.abs(sig_n2) <= tol.SIGMA_DENOM_FLOOR).any():
        raise SingularityError("sigma_{n-1} or sigma_{n-2} of mu underflowed")
    a = np.cbrt(sig_n / sig_n1)
    q = sig_n1 / sig_n2
    residual = -sig_n2 + cfg.A1 * sig_n1 - cfg.A2 * sig_n
    lam_e = kernels.esp_batch(lams)
    factor_dev = np.abs(sig_n * (lam_e[:, 2] - 1.0) + residual)
    factor_scale = 1.0 + np.abs(residual) + sig_n * np.abs(lam_e[:, 2] - 1.0)
    trace_dev = np.abs((lam_e[:, 1] + cfg.J) - (1.0 / mu).sum(axis=1))
    trace_scale = 1.0 + np.abs(lam_e[:, 1] + cfg.J)
    quot_dev = np.abs(q * (cfg.A1 - cfg.A2 * a ** 3) - 1.0)
    return {
        "mu": mu, "esp": e, "a": a, "q": q, "residual": residual,
        "factor_dev": factor_dev, "factor_scale": factor_scale,
        "trace_dev": trace_dev, "trace_scale": trace_scale,
        "quotient_dev": quot_dev,
    }


def eigenvalue_bounds_check(states, cfg: TransformConfig) -> tuple:
    """Empirical (c_top, c_rest): max over states of the smallest mu and min
    over states of the remaining mu_i, estimating the rectangle constants."""
    if isinstance(states, dict):
        mu = states["mu"]
    else:
        states = list(states)
        if not states:
            raise DomainError("eigenvalue bounds need at least one state")
        mu = np.stack([st.mu.values for st in states])
    if mu.size == 0:
        raise DomainError("eigenvalue bounds need at least one state")
    c_top = float(mu[:, 0].max())
    c_rest = float(mu[:, 1:].min())
    return c_top, c_rest


def quotient_q(mu) -> float:
    """Hessian quotient q(mu) = sigma_{n-1}/sigma_{n-2}."""
    spec = mu if isinstance(mu, Spectrum) else Spectrum(np.asarray(mu, dtype=np.float64))
    return quotient(spec, spec.n - 1, spec.n - 2)


def q_ellipticity(mu) -> np.ndarray:
    """Exact gradient of the quotient:
    dq/dmu_i = [sigma_{n-2,i} sigma_{n-2} - sigma_{n-1} sigma_{n-3,i}] / sigma_{n-2}^2,
    strictly positive for mu > 0."""
    values = mu.values if isinstance(mu, Spectrum) else np.asarray(mu, dtype=np.float64)
    if (values <= 0.0).any():
        raise DomainError("q_ellipticity needs strictly positive mu")
    return q_ellipticity_batch(values[None, :])[0]


def q_ellipticity_batch(mu: np.ndarray) -> np.ndarray:
    mu = np.asarray(mu, dtype=np.float64)
    b, n = mu.shape
    e = kernels.esp_batch(mu)
    drop = kernels.esp_drop1_batch(mu)
    sig_n1 = e[:, n - 1]
    sig_n2 = e[:, n - 2]
    s_n2_i = drop[:, :, n - 2]
    s_n3_i = drop[:, :, n - 3] if n >= 3 else np.zeros((b, n))
    return (s_n2_i * sig_n2[:, None] - sig_n1[:, None] * s_n3_i) / (sig_n2 ** 2)[:, None]


def q_batch(mu: np.ndarray) -> np.ndarray:
    e = kernels.esp_batch(mu)
    n = mu.shape[1]
    return e[:, n - 1] / e[:, n - 2]


# ---------------------------------------------------------------------------
# discrete Legendre transform on grids
# ---------------------------------------------------------------------------

def _conjugate_1d(x, fvals, y):
    """Exact discrete conjugate max_i (x_i y - f_i) for one row.

    Lower convex hull + monotone sweep; linear in len(x) + len(y).
    Returns (values, argmax indices into x)."""
    m = x.size
    hull = np.empty(m, dtype=np.intp)
    top = 0
    for i in range(m):
        # pop while the new point makes the chain non-convex from below
        while top >= 2:
            h1 = hull[top - 2]
            h2 = hull[top - 1]
            if (fvals[h2] - fvals[h1]) * (x[i] - x[h2]) >= (fvals[i] - fvals[h2]) * (x[h2] - x[h1]):
                top -= 1
            else:
                break
        hull[top] = i
        top += 1
    w = np.empty(y.size)
    arg = np.empty(y.size, dtype=np.intp)
    v = 0
    for j in range(y.size):
        yj = y[j]
        while v + 1 < top:
            a = hull[v]
            bb = hull[v + 1]
            if fvals[bb] - fvals[a] <= yj * (x[bb] - x[a]):
                v += 1
            else:
                break
        arg[j] = hull[v]
        w[j] = x[hull[v]] * yj - fvals[hull[v]]
    return w, arg


def _conjugate_axis(f, x, y, axis):
    """Apply the 1-D discrete conjugate along one axis of an nd array."""
    moved = np.moveaxis(f, axis, -1)
    lead = moved.shape[:-1]
    flat = moved.reshape(-1, moved.shape[-1])
    out = np.empty((flat.shape[0], y.size))
    arg = np.empty((flat.shape[0], y.size), dtype=np.intp)
    for r in range(flat.shape[0]):
        out[r], arg[r] = _conjugate_1d(x, flat[r], y)
    out = np.moveaxis(out.reshape(lead + (y.size,)), -1, axis)
    arg = np.moveaxis(arg.reshape(lead + (y.size,)), -1, axis)
    return out, arg


def _gradient_ranges(grid: PotentialGrid):
    """Per-axis range of attained gradients.

    The naive per-axis min/max overstates the (non-rectangular) image of
    the gradient map and puts grid corners where the conjugate degenerates.
    The inner rectangle [max of d_k f on the face x_k = lo, min on the face
    x_k = hi] is attained everywhere (Miranda), and equals the full range
    for quadratic data."""
    grads = gradient_fields(grid)
    out = []
    for k, g in enumerate(grads):
        lo = float(np.take(g, 0, axis=k).max())
        hi = float(np.take(g, -1, axis=k).min())
        if not hi > lo:
            # non-convex data: fall back to the raw range
            lo, hi = float(g.min()), float(g.max())
        out.append((lo, hi))
    return out


def discrete_conjugate(grid: PotentialGrid, out_axes=None, refine=True) -> PotentialGrid:
    """Discrete Legendre-Fenchel conjugate w(y) = max_x [<x, y> - f(x)].

    The maximum over lattice nodes is computed by the linear-time
    dimension-wise algorithm.  With refine=True the argmax node is upgraded
    by one Newton step on a local quadratic model of f (finite-difference
    gradient and Hessian at the node), which is exact on quadratic data and
    keeps discrete second derivatives of w first-order accurate; the raw
    node maximum is piecewise linear and its stencil Hessians do not
    converge.  out_axes overrides the output ranges (default: the discrete
    gradient range per axis, same node count)."""
    n, m = grid.n, grid.m
    if out_axes is None:
        out_axes = _gradient_ranges(grid)
    ys = [np.linspace(lo, hi, m) for lo, hi in out_axes]

    # dimension-wise exact node maximum, tracking the argmax multi-index
    work = grid.values
    args = []
    for k in range(n):
        if k > 0:
            work = -work
        work, arg_k = _conjugate_axis(work, grid.axis_coords(k), ys[k], axis=k)
        for prev in args:
            prev[...] = np.take_along_axis(prev, arg_k, axis=k)
        args.append(arg_k)
    w = work

    aux = None
    if refine:
        w, aux = _refine_conjugate(grid, ys, w, args)
    return PotentialGrid(n=n, m=m, axes=tuple(out_axes), values=w, aux=aux)


def _refine_conjugate(grid, ys, w, args):
    """One exact Newton step on the local quadratic model of f at the argmax
    node: x* = x0 + M0^{-1}(y - g0), w = <x*, y> - model(x*).  Falls back to
    the node value wherever the local Hessian is not positive definite.

    Also attaches source-side payloads for the superharmonicity diagnostics:
    the Laplacian of f ("source_trace", third-order model) and the Hessian
    entries ("source_hessian") evaluated at a smoothness-polished maximizer.
    Downstream checks read sum_i 1/mu_i off the smooth source lattice,
    because stencil Hessians of the conjugated values carry node-scale
    model-switch jumps that two further differencings amplify into
    non-convergent noise."""
    n, m = grid.n, grid.m
    hs = grid.spacings
    idx0 = [np.clip(a, 1, m - 2) for a in args]        # stencil needs interior
    flat0 = np.ravel_multi_index([(a - 1).reshape(-1) for a in idx0], (m - 2,) * n)
    grads = gradient_fields(grid)
    g0 = np.stack([g[tuple(a for a in idx0)] for g in grads], axis=-1)
    ent = hessian_entries(grid)
    hess = hessian_matrices(grid, ent)[flat0].reshape(w.shape + (n, n))
    x0 = np.stack([grid.axis_coords(k)[idx0[k]] for k in range(n)], axis=-1)
    u0 = grid.values[tuple(a for a in idx0)]
    ymesh = np.stack(np.meshgrid(*ys, indexing="ij"), axis=-1)
    rhs = ymesh - g0
    det_ok = _pd_mask(hess)
    safe = np.where(det_ok[..., None, None], hess, np.eye(n))
    step = np.linalg.solve(safe, rhs[..., None])[..., 0]
    caps = np.array([2.0 * h for h in hs])
    step = np.clip(step, -caps, caps)
    model = (u0 + (g0 * step).sum(-1)
             + 0.5 * np.einsum("...i,...ij,...j->...", step, hess, step))
    refined = ((x0 + step) * ymesh).sum(-1) - model
    out = np.where(det_ok, refined, w)
    out = np.maximum(out, w)  # the node maximum is a certified lower bound

    aux = None
    if m >= 11:
        xstar = _smooth_maximizer(grid, ent, grads, args, x0 + step, ymesh)
        aux = {
            "source_trace": _trace_model(grid, ent, args, xstar, w.shape),
            "source_hessian": _hessian_model(grid, ent, args, xstar, w.shape),
        }
    return out, aux


def _smooth_maximizer(grid, ent, grads, args, xstar, ymesh):
    """Polish the maximizer with a third-order gradient model.

    The quadratic-model maximizer jumps by O(h^2) across argmax-cell
    switches (piecewise stencil gradients); the source-side payloads are
    first-order sensitive to x*, so those jumps would leave a noise floor
    that two downstream differencings never shrink.  Two Newton corrections
    against the cubic gradient model make y -> x*(y) continuous to O(h^3).
    """
    n, m = grid.n, grid.m
    hs = grid.spacings
    idx = [np.clip(a, 3, m - 4) for a in args]
    in0 = tuple(idx)
    in1 = tuple(a - 1 for a in idx)
    shape = ymesh.shape[:-1]
    x0 = np.stack([grid.axis_coords(k)[idx[k]] for k in range(n)], axis=-1)
    g0 = np.stack([g[in0] for g in grads], axis=-1)
    m0 = np.empty(shape + (n, n))
    for a in range(n):
        for b in range(a, n):
            fld = ent[(a, b)][in1]
            m0[..., a, b] = fld
            m0[..., b, a] = fld
    t3 = np.zeros(shape + (n, n, n))
    axes2 = tuple((lo + h, hi - h) for (lo, hi), h in zip(grid.axes, hs))
    for (a, b), fld in ent.items():
        egrid = PotentialGrid(n=n, m=m - 2, axes=axes2, values=fld)
        for c, gf in enumerate(gradient_fields(egrid)):
            val = gf[in1]
            t3[..., a, b, c] = val
            if a != b:
                t3[..., b, a, c] = val
    ok = _pd_mask(m0)
    safe = np.where(ok[..., None, None], m0, np.eye(n))
    s = xstar - x0
    for _ in range(2):
        gm = (g0 + np.einsum("...ab,...b->...a", m0, s)
              + 0.5 * np.einsum("...abc,...b,...c->...a", t3, s, s))
        s = s - np.linalg.solve(safe, (gm - ymesh)[..., None])[..., 0]
    caps = np.array([4.0 * h for h in hs])
    s = np.clip(s, -caps, caps)
    return x0 + np.where(ok[..., None], s, xstar - x0)


def _interior_field_model(grid, field, args, xstar, shape, cubic=False):
    """Local Taylor model of an interior-lattice field, evaluated at the
    refined maximizer xstar.

    Second order keeps model-switch jumps at O(h^3); with cubic=True the
    third-order term pushes them to O(h^4), needed for quantities that are
    differenced twice more downstream."""
    n, m = grid.n, grid.m
    hs = grid.spacings
    faxes = tuple((lo + h, hi - h) for (lo, hi), h in zip(grid.axes, hs))
    fgrid = PotentialGrid(n=n, m=m - 2, axes=faxes, values=field)
    grads = gradient_fields(fgrid)
    ent_f = hessian_entries(fgrid)
    hess = hessian_matrices(fgrid, ent_f)
    lo_idx = 3 if cubic else 2
    idx = [np.clip(a, lo_idx, m - 1 - lo_idx) for a in args]
    in1 = tuple(a - 1 for a in idx)          # on the (m-2) lattice
    in2 = tuple(a - 2 for a in idx)          # on the (m-4) lattice
    flat2 = np.ravel_multi_index([a.reshape(-1) for a in in2], (m - 4,) * n)
    v0 = field[in1]
    gv = np.stack([g[in1] for g in grads], axis=-1)
    mv = hess[flat2].reshape(shape + (n, n))
    x0 = np.stack([grid.axis_coords(k)[idx[k]] for k in range(n)], axis=-1)
    s = xstar - x0
    out = v0 + (gv * s).sum(-1) + 0.5 * np.einsum("...i,...ij,...j->...", s, mv, s)
    if cubic:
        axes4 = tuple((lo + h, hi - h) for (lo, hi), h in zip(faxes, hs))
        third = {}
        for (a, b), fld in ent_f.items():
            g4 = PotentialGrid(n=n, m=m - 4, axes=axes4, values=fld)
            for c, gf in enumerate(gradient_fields(g4)):
                third[(a, b, c)] = gf
        cub = np.zeros(shape)
        for a in range(n):
            for b in range(n):
                for c in range(n):
                    key = (min(a, b), max(a, b), c)
                    cub += third[key][in2] * s[..., a] * s[..., b] * s[..., c]
        out = out + cub / 6.0
    return out


def _trace_model(grid, ent, args, xstar, shape):
    tfield = sum(ent[(a, a)] for a in range(grid.n))
    return _interior_field_model(grid, tfield, args, xstar, shape, cubic=True)


def _hessian_model(grid, ent, args, xstar, shape):
    """Source Hessians D^2 f(x*) as an (..., n, n) field from per-entry
    second-order models."""
    n = grid.n
    out = np.empty(shape + (n, n))
    for a in range(n):
        for b in range(a, n):
            fld = _interior_field_model(grid, ent[(a, b)], args, xstar, shape)
            out[..., a, b] = fld
            out[..., b, a] = fld
    return out


def _pd_mask(hess: np.ndarray) -> np.ndarray:
    """Positive definiteness by leading principal minors (n <= 3)."""
    n = hess.shape[-1]
    ok = hess[..., 0, 0] > 0.0
    if n >= 2:
        ok &= hess[..., 0, 0] * hess[..., 1, 1] - hess[..., 0, 1] ** 2 > 0.0
    if n >= 3:
        ok &= np.linalg.det(hess) > 0.0
    return ok


def shifted_potential(u: PotentialGrid, cfg: TransformConfig) -> PotentialGrid:
    """u + Kbar |x|^2 / 2 on the same lattice."""
    mesh = u.meshgrid()
    shift = sum(c * c for c in mesh) * (cfg.kbar / 2.0)
    return u.replace_values(u.values + shift)


def check_discrete_convexity(grid: PotentialGrid) -> None:
    """Raise ConvexityError (with the offending node) unless the interior
    discrete Hessian is positive definite everywhere."""
    mats = hessian_matrices(grid)
    evs = eigvals_sym_batch(mats)
    bad = np.flatnonzero(evs[:, 0] <= 0.0)
    if bad.size:
        node = np.unravel_index(int(bad[0]), (grid.m - 2,) * grid.n)
        node = tuple(int(x) + 1 for x in node)
        raise ConvexityError(
            f"discrete Hessian not positive definite at node {node}", node=node)


def transform_grid(u: PotentialGrid, cfg: TransformConfig) -> PotentialGrid:
    """Legendre-Lewy image of a K-semiconvex potential grid.

    Verifies the discrete convexity of u + Kbar |x|^2 / 2, then conjugates
    onto a uniform grid over the discrete gradient range."""
    shifted = shifted_potential(u, cfg)
    check_discrete_convexity(shifted)
    return discrete_conjugate(shifted, refine=True)
