"""Shifted-trace Jacobi inequality as an executable certificate.

For b = ln(Delta u + J) on the constraint set {sigma_2(lam) = 1, sigma_1 > 0,
lam >= -K} the quantity Delta_F b - eps |grad_F b|^2 is non-negative when
J = 8nK/3 and eps = 1/3.  This module samples the constraint manifold,
builds tangent third-order jets, and evaluates the certificate together
with the closed-form 2x2 reduction of its quadratic form.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import tolerances as tol
from .backend import kernels
from .errors import (
    DomainError,
    EllipticityError,
    NumericalError,
    PreconditionError,
    SamplerStarvationError,
    SingularityError,
)
from .symcore import Spectrum

DEFAULT_EPSILON = 1.0 / 3.0


def default_shift(n: int, k_floor: float) -> float:
    """The certificate's trace shift J = 8nK/3."""
    return 8.0 * n * k_floor / 3.0


def default_lam_max(k_floor: float) -> float:
    """Sampling range cap; 10(1+K), or 20 in the unbounded (K = inf) mode."""
    if not math.isfinite(k_floor):
        return 20.0
    return 10.0 * (1.0 + k_floor)


# ---------------------------------------------------------------------------
# constraint-manifold sampling
# ---------------------------------------------------------------------------

def sample_lambda_batch(n, k_floor, count, seed_key, lam_max=None, pin_prob=0.25):
    """Vectorized rejection sampler for {sigma_2 = 1, sigma_1 > 0, lam >= -K}.

    Draws lam_2..lam_n uniformly, solves lam_1 = (1 - sigma_2(rest)) /
    sigma_1(rest) and rejects ill-conditioned or off-floor draws.  With
    probability pin_prob one coordinate is pinned at exactly -K (skipped in
    the unbounded mode, where k_floor = inf drops the floor entirely).
    Deterministic for a fixed seed_key (any sequence of ints).
    """
    if n < 2:
        raise DomainError("sampler needs n >= 2")
    if count < 1:
        raise DomainError("sampler needs count >= 1")
    unbounded = not math.isfinite(k_floor)
    if not unbounded and k_floor <= 0.0:
        raise DomainError("semiconvexity constant K must be positive")
    if lam_max is None:
        lam_max = default_lam_max(k_floor)
    lo = -lam_max if unbounded else -k_floor
    rng = np.random.default_rng(np.random.SeedSequence(tuple(int(v) for v in seed_key)))
    out = np.empty((count, n))
    got = 0
    drawn = 0
    while got < count:
        m = max(1024, 2 * (count - got))
        rest = rng.uniform(lo, lam_max, size=(m, n - 1))
        if not unbounded and pin_prob > 0.0:
            pin = rng.random(m) < pin_prob
            rest[pin, -1] = -k_floor
        e = kernels.esp_batch(rest)
        s1r = e[:, 1]
        s2r = e[:, 2] if n >= 3 else np.zeros(m)
        ok = s1r > tol.SAMPLER_SIGMA1_FLOOR
        lam1 = np.where(ok, (1.0 - s2r) / np.where(ok, s1r, 1.0), 0.0)
        sig1 = lam1 + s1r
        ok &= sig1 > 0.0
        if not unbounded:
            ok &= lam1 >= -k_floor
        acc = np.flatnonzero(ok)
        if acc.size:
            rows = np.empty((acc.size, n))
            rows[:, 0] = lam1[acc]
            rows[:, 1:] = rest[acc]
            # one Newton polish of lam_1 against the full evaluation keeps
            # |sigma_2 - 1| at rounding level even for ill-conditioned draws
            e_full = kernels.esp_batch(rows)
            rows[:, 0] -= (e_full[:, 2] - 1.0) / s1r[acc]
            e2 = kernels.esp_batch(rows)[:, 2]
            good = np.abs(e2 - 1.0) <= 0.5 * tol.SAMPLE_SIGMA2_TOL
            if not unbounded:
                good &= rows[:, 0] >= -k_floor
            rows = rows[good]
            take = min(rows.shape[0], count - got)
            if take:
                out[got : got + take] = rows[:take]
                got += take
        drawn += m
        if drawn >= tol.SAMPLER_STARVE_WINDOW and got / drawn < tol.SAMPLER_STARVE_RATE:
            raise SamplerStarvationError(
                f"sampler acceptance rate {got}/{drawn} collapsed "
                f"(n={n}, K={k_floor}, lam_max={lam_max})",
                drawn=drawn,
                accepted=got,
            )
    return out


def ray_lambda_batch(n, count, t_max=1.0e6):
    """Deterministic manifold ray lam = (T, 1/T, 0, ..., 0), T in [1, t_max].

    sigma_2 = 1 exactly; probes the large-sigma_1 end of the manifold."""
    if count < 1:
        raise DomainError("ray family needs count >= 1")
    t = np.logspace(0.0, math.log10(t_max), count)
    lam = np.zeros((count, n))
    lam[:, 0] = t
    lam[:, 1] = 1.0 / t
    return lam


@dataclass(frozen=True)
class ConstraintSample:
    """A spectrum on {sigma_2 = 1, sigma_1 > 0, lam >= -K} with the shift J
    and the certificate exponents (delta = 1 + epsilon exactly)."""

    spectrum: Spectrum
    K: float
    J: float
    epsilon: float = DEFAULT_EPSILON

    def __post_init__(self):
        lam = self.spectrum.values
        e = self.spectrum.esp()
        if abs(e[2] - 1.0) > tol.SAMPLE_SIGMA2_TOL:
            raise DomainError(f"sigma_2 = {e[2]!r} violates the constraint (tol {tol.SAMPLE_SIGMA2_TOL})")
        if e[1] <= 0.0:
            raise DomainError("constraint samples live on the positive-trace branch")
        if math.isfinite(self.K) and lam.min() < -self.K - tol.SEMICONVEXITY_SLACK:
            raise DomainError(f"min eigenvalue {lam.min()!r} below the -K floor")
        if self.J < 0.0:
            raise DomainError("shift J must be non-negative")

    @property
    def delta(self) -> float:
        return 1.0 + self.epsilon

    @property
    def n(self) -> int:
        return self.spectrum.n

    @property
    def sigma1(self) -> float:
        return self.spectrum.sigma1

    @property
    def f(self) -> np.ndarray:
        """Linearization eigenvalues f_i = sigma_1 - lam_i."""
        return self.sigma1 - self.spectrum.values

    @property
    def df_sq(self) -> float:
        f = self.f
        return float((f * f).sum())

    @classmethod
    def from_values(cls, values, k_floor, shift=None, epsilon=DEFAULT_EPSILON):
        values = np.asarray(values, dtype=np.float64)
        if shift is None:
            shift = default_shift(values.size, k_floor)
        return cls(spectrum=Spectrum(values), K=k_floor, J=shift, epsilon=epsilon)


def sample_constraint(n, k_floor, count, seed, lam_max=None, pin_prob=0.25,
                      shift=None, epsilon=DEFAULT_EPSILON):
    """Deterministic list of ConstraintSample; see sample_lambda_batch."""
    if shift is None:
        if not math.isfinite(k_floor):
            raise DomainError("the unbounded mode needs an explicit shift J")
        shift = default_shift(n, k_floor)
    lams = sample_lambda_batch(n, k_floor, count, (seed,), lam_max, pin_prob)
    return [ConstraintSample.from_values(row, k_floor, shift, epsilon) for row in lams]


# ---------------------------------------------------------------------------
# symmetric 3-tensors and tangent jets
# ---------------------------------------------------------------------------

@lru_cache(maxsize=None)
def _multiset_map(n: int):
    """(multiset list, position->multiset id array of shape (n,n,n))."""
    multisets = list(itertools.combinations_with_replacement(range(n), 3))
    lookup = {m: i for i, m in enumerate(multisets)}
    ids = np.empty((n, n, n), dtype=np.intp)
    for ijk in itertools.product(range(n), repeat=3):
        ids[ijk] = lookup[tuple(sorted(ijk))]
    return multisets, ids


def tensor_from_packed(packed: np.ndarray, n: int) -> np.ndarray:
    """Expand packed sorted-index entries (B, n_multisets) to exactly
    symmetric full tensors (B, n, n, n)."""
    _, ids = _multiset_map(n)
    return packed[:, ids.ravel()].reshape(packed.shape[0], n, n, n)


def symmetrize_tensor(raw) -> np.ndarray:
    """Full symmetrization of a (n, n, n) array, exact under index
    permutations by sorted-index storage."""
    raw = np.asarray(raw, dtype=np.float64)
    n = raw.shape[0]
    multisets, ids = _multiset_map(n)
    packed = np.zeros(len(multisets))
    counts = np.zeros(len(multisets))
    np.add.at(packed, ids.ravel(), raw.ravel())
    np.add.at(counts, ids.ravel(), 1.0)
    packed /= counts
    return tensor_from_packed(packed[None, :], n)[0]


def random_tensor_batch(rng, b: int, n: int) -> np.ndarray:
    """Standard-normal packed entries scattered to exactly symmetric
    (b, n, n, n) tensors."""
    multisets, _ = _multiset_map(n)
    packed = rng.standard_normal((b, len(multisets)))
    return tensor_from_packed(packed, n)


def tangency_residual(f: np.ndarray, c: np.ndarray) -> np.ndarray:
    """Constraint values r_k = sum_i f_i c_iik, batched."""
    n = f.shape[-1]
    idx = np.arange(n)
    return np.einsum("bi,bik->bk", np.atleast_2d(f), c.reshape(-1, n, n, n)[:, idx, idx, :])


@dataclass(frozen=True)
class Jet:
    """Third-order data at a point with diagonal Hessian: a fully symmetric
    tensor whose diagonal slices are tangent to {sigma_2 = 1}."""

    sample: ConstraintSample
    tensor: np.ndarray

    def __post_init__(self):
        c = np.array(self.tensor, dtype=np.float64, copy=True)
        n = self.sample.n
        if c.shape != (n, n, n):
            raise DomainError(f"jet tensor must have shape {(n, n, n)}")
        if not (np.array_equal(c, c.transpose(0, 2, 1)) and np.array_equal(c, c.transpose(1, 0, 2))):
            raise DomainError("jet tensor must be exactly index-symmetric")
        f = self.sample.f
        scale = 1.0 + float(np.abs(f).max()) * float(np.abs(c).max())
        res = np.abs(tangency_residual(f[None, :], c[None])).max()
        if res > tol.TANGENCY_TOL * scale:
            raise DomainError(f"tangency residual {res:.3e} exceeds tolerance")
        c.flags.writeable = False
        object.__setattr__(self, "tensor", c)


def project_jet(sample: ConstraintSample, raw) -> Jet:
    """Closest (Frobenius) symmetric tensor satisfying the n tangency
    constraints sum_i f_i c_iik = 0.

    The constraints touch disjoint diagonal-slice multisets, so the
    projection splits into n independent rank-one corrections solved
    exactly."""
    c = symmetrize_tensor(raw)
    projected = kernels.tangency_project(sample.f[None, :], c[None])[0]
    return Jet(sample=sample, tensor=projected)


# ---------------------------------------------------------------------------
# quadratic form, 2x2 reduction, determinant bound
# ---------------------------------------------------------------------------

def _eta(sample: ConstraintSample, i: int) -> float:
    return 1.0 + sample.delta * float(sample.f[i]) / (sample.sigma1 + sample.J)


def q_form_direct(sample: ConstraintSample, i: int, t) -> float:
    """Q = 3|t|^2 - 2 <e_i, t>^2 - eta <(1,..,1), t>^2 on tangent vectors."""
    t = np.asarray(t, dtype=np.float64)
    n = sample.n
    if not 0 <= i < n:
        raise DomainError(f"index {i} outside 0..{n - 1}")
    if t.shape != (n,):
        raise DomainError(f"tangent vector must have length {n}")
    f = sample.f
    fn = math.sqrt(sample.df_sq)
    tn = float(np.linalg.norm(t))
    if abs(float(f @ t)) > tol.TANGENT_PRECONDITION * fn * tn and tn > 0.0:
        raise PreconditionError("vector is not tangent to the constraint set")
    ones = float(t.sum())
    return float(3.0 * (t @ t) - 2.0 * t[i] ** 2 - _eta(sample, i) * ones * ones)


@dataclass(frozen=True)
class QReduction:
    """Gram data of the tangential projections E = (e_i)_T, L = (1,..,1)_T
    and the 2x2 trace/determinant of the reduced quadratic form."""

    i: int
    E: np.ndarray
    L: np.ndarray
    normE2: float
    normL2: float
    EdotL: float
    eta: float
    trQ: float
    detQ: float

    @property
    def discriminant(self) -> float:
        return self.trQ * self.trQ - 4.0 * self.detQ

    @property
    def xi_min(self) -> float:
        return 0.5 * (self.trQ - math.sqrt(max(self.discriminant, 0.0)))

    @property
    def xi_max(self) -> float:
        return 0.5 * (self.trQ + math.sqrt(max(self.discriminant, 0.0)))


def q_reduction_eigen(sample: ConstraintSample, i: int) -> QReduction:
    """Project e_i and (1,..,1) tangentially and reduce Q to the 2x2
    eigenproblem on span{E, L}.

    The Gram norms must match their on-manifold closed forms
    |E|^2 = 1 - f_i^2/|Df|^2, |L|^2 = 1 - 2(n-1)/|Df|^2,
    E.L = 1 - (n-1) sigma_1 f_i / |Df|^2; real eigenvalues require
    tr^2 >= 4 det, asserted within slack."""
    n = sample.n
    if not 0 <= i < n:
        raise DomainError(f"index {i} outside 0..{n - 1}")
    f = sample.f
    df2 = sample.df_sq
    if df2 <= 1e-12:
        raise SingularityError("|Df|^2 degenerate on the constraint set", value=df2)
    s1 = sample.sigma1
    e_i = np.zeros(n)
    e_i[i] = 1.0
    evec = e_i - (f[i] / df2) * f
    lvec = np.ones(n) - ((n - 1) * s1 / df2) * f
    norm_e2 = float(evec @ evec)
    norm_l2 = float(lvec @ lvec)
    edotl = float(evec @ lvec)
    closed = (
        1.0 - f[i] ** 2 / df2,
        1.0 - 2.0 * (n - 1) / df2,
        1.0 - (n - 1) * s1 * f[i] / df2,
    )
    for direct, expect in zip((norm_e2, norm_l2, edotl), closed):
        if abs(direct - expect) > tol.GRAM_IDENTITY_TOL * (1.0 + abs(expect)):
            raise NumericalError("Gram data disagrees with its closed form; input off-manifold?")
    eta = _eta(sample, i)
    tr = 6.0 - 2.0 * norm_e2 - eta * norm_l2
    det = 9.0 - 6.0 * norm_e2 - 3.0 * eta * norm_l2 + 2.0 * eta * (norm_e2 * norm_l2 - edotl * edotl)
    if tr * tr - 4.0 * det < -tol.DISCRIMINANT_SLACK:
        raise NumericalError("2x2 reduction produced complex eigenvalues")
    return QReduction(i=i, E=evec, L=lvec, normE2=norm_e2, normL2=norm_l2,
                      EdotL=edotl, eta=eta, trQ=tr, detQ=det)


def det_lower_bound(sample: ConstraintSample, i: int):
    """(lhs, rhs) of the closed-form determinant bound at delta = 4/3:
    lhs = det (sigma_1 + J) |Df|^2 / f_i,
    rhs = 8 + 2(n+1) J sigma_1 + 2(n-3) J lam_i
          + (2(n+1)/3) sigma_1 f_i + (8/3) n lam_i f_i."""
    if abs(sample.delta - 4.0 / 3.0) > 1e-15:
        raise PreconditionError("determinant bound requires delta = 4/3")
    n = sample.n
    f_i = float(sample.f[i])
    if f_i <= 0.0:
        raise EllipticityError(f"f_{i} = {f_i!r} <= 0: off-branch input")
    red = q_reduction_eigen(sample, i)
    s1 = sample.sigma1
    lam_i = float(sample.spectrum.values[i])
    shift = sample.J
    lhs = red.detQ * (s1 + shift) * sample.df_sq / f_i
    rhs = (8.0 + 2.0 * (n + 1) * shift * s1 + 2.0 * (n - 3) * shift * lam_i
           + (2.0 * (n + 1) / 3.0) * s1 * f_i + (8.0 / 3.0) * n * lam_i * f_i)
    return lhs, rhs


# ---------------------------------------------------------------------------
# the certificate itself
# ---------------------------------------------------------------------------

def jacobi_excess(jet: Jet) -> float:
    """Delta_F b - eps |grad_F b|^2 evaluated from third-order data:

    (sigma_1 + J) * excess = sum_{ijk} c_ijk^2
                             - sum_i (1 + delta f_i/(sigma_1+J)) (Delta u_i)^2
    with Delta u_i = sum_k c_kki.  Non-negative on every tangent jet when
    J = 8nK/3 and eps = 1/3."""
    lam = jet.sample.spectrum.values
    return float(kernels.excess_batch(lam[None, :], jet.tensor[None],
                                      jet.sample.J, jet.sample.delta)[0])


def superharmonic_form(jet: Jet) -> float:
    """Delta_F e^{-b/3} = -(1/3)(sigma_1+J)^{-1/3} (Delta_F b - |grad_F b|^2/3),
    computed from the separate Laplacian/gradient routes.  Requires
    eps = 1/3; equal to -(1/3)(sigma_1+J)^{-1/3} * jacobi_excess."""
    if abs(jet.sample.epsilon - 1.0 / 3.0) > 1e-15:
        raise PreconditionError("superharmonic form requires eps = 1/3")
    lam = jet.sample.spectrum.values
    n = lam.size
    c = jet.tensor
    s1 = jet.sample.sigma1
    shift = jet.sample.J
    denom = s1 + shift
    f = jet.sample.f
    idx = np.arange(n)
    d = c[idx, idx, :].sum(axis=0)
    total = float((c * c).sum())
    lap_b = (total - float(d @ d) - float((f * d * d).sum()) / denom) / denom
    grad_b2 = float((f * d * d).sum()) / (denom * denom)
    return -(1.0 / 3.0) * denom ** (-1.0 / 3.0) * (lap_b - grad_b2 / 3.0)


def remark_3d(lambda1: float, lambda2: float):
    """Three-dimensional unshifted case: lam_3 = (1 - l1 l2)/(l1 + l2) and
    ratio = sigma_1 / (-lam_3) = -1 + (l1+l2)^2/(l1 l2 - 1) > 3 strictly."""
    if not (lambda1 >= lambda2 > 0.0):
        raise PreconditionError("requires lam_1 >= lam_2 > 0")
    prod = lambda1 * lambda2
    if prod <= 1.0:
        raise PreconditionError("requires lam_1 lam_2 > 1 (negative lam_3 case)")
    lam3 = (1.0 - prod) / (lambda1 + lambda2)
    ratio = -1.0 + (lambda1 + lambda2) ** 2 / (prod - 1.0)
    return lam3, ratio


# ---------------------------------------------------------------------------
# vectorized batch evaluation (shared by the CLI and the acceptance suite)
# ---------------------------------------------------------------------------

def batch_f(lam: np.ndarray):
    s1 = lam.sum(axis=1)
    f = s1[:, None] - lam
    df2 = (f * f).sum(axis=1)
    return s1, f, df2


def reduction_batch(lam: np.ndarray, shift: float, delta: float):
    """Closed-form Gram data, (tr, det) and an orthonormal-basis oracle for
    every (sample, i).  Returns a dict of (B,) / (B, n) arrays."""
    b, n = lam.shape
    s1, f, df2 = batch_f(lam)
    e2 = 1.0 - f * f / df2[:, None]
    l2 = 1.0 - 2.0 * (n - 1) / df2
    el = 1.0 - (n - 1) * s1[:, None] * f / df2[:, None]
    eta = 1.0 + delta * f / (s1 + shift)[:, None]
    tr = 6.0 - 2.0 * e2 - eta * l2[:, None]
    det = (9.0 - 6.0 * e2 - 3.0 * eta * l2[:, None]
           + 2.0 * eta * (e2 * l2[:, None] - el * el))
    # direct-vector Gram route (independent arithmetic for the identity check)
    evec = np.broadcast_to(np.eye(n), (b, n, n)) - (f[:, :, None] * f[:, None, :]) / df2[:, None, None]
    lvec = 1.0 - ((n - 1) * s1 / df2)[:, None] * f
    g11 = np.einsum("bij,bij->bi", evec, evec)
    g22 = (lvec * lvec).sum(axis=1)
    g12 = np.einsum("bij,bj->bi", evec, lvec)
    # restriction of T = 3I - 2 E otimes E - eta L otimes L to span{E, L} in
    # a pivoted orthonormal basis; its eigen data is the 2x2 oracle
    g22b = np.broadcast_to(g22[:, None], g12.shape)
    pivot_e = g11 >= g22b
    big = np.where(pivot_e, g11, g22b)
    small = np.where(pivot_e, g22b, g11)
    safe_big = np.maximum(big, 1e-300)
    r2 = np.maximum(small - g12 * g12 / safe_big, 0.0)
    rank2 = r2 > tol.RANK_TOL * np.maximum(big, 1.0)
    sq_big = np.sqrt(safe_big)
    # dots of E and L with the orthonormal pair (q1, q2)
    e_q1 = np.where(pivot_e, sq_big, g12 / sq_big)
    l_q1 = np.where(pivot_e, g12 / sq_big, sq_big)
    e_q2 = np.where(pivot_e, 0.0, np.sqrt(r2))
    l_q2 = np.where(pivot_e, np.sqrt(r2), 0.0)
    s11 = 3.0 - 2.0 * e_q1 * e_q1 - eta * l_q1 * l_q1
    s12 = -2.0 * e_q1 * e_q2 - eta * l_q1 * l_q2
    s22 = 3.0 - 2.0 * e_q2 * e_q2 - eta * l_q2 * l_q2
    tr_oracle = np.where(rank2, s11 + s22, s11 + 3.0)
    det_oracle = np.where(rank2, s11 * s22 - s12 * s12, 3.0 * s11)
    return {
        "s1": s1, "f": f, "df2": df2,
        "normE2": e2, "normL2": l2, "EdotL": el, "eta": eta,
        "trQ": tr, "detQ": det,
        "normE2_direct": g11, "normL2_direct": g22, "EdotL_direct": g12,
        "tr_oracle": tr_oracle, "det_oracle": det_oracle,
        "evec": evec, "lvec": lvec,
    }


def det_bound_batch(lam: np.ndarray, shift: float, detq: np.ndarray):
    """(lhs, rhs) arrays of the delta = 4/3 determinant bound."""
    b, n = lam.shape
    s1, f, df2 = batch_f(lam)
    lhs = detq * ((s1 + shift) * df2)[:, None] / f
    rhs = (8.0 + 2.0 * (n + 1) * shift * s1[:, None] + 2.0 * (n - 3) * shift * lam
           + (2.0 * (n + 1) / 3.0) * s1[:, None] * f + (8.0 / 3.0) * n * lam * f)
    return lhs, rhs


def qform_slices_batch(lam, c, shift, delta, red=None):
    """Per-(sample, i) values of Q on the jet's own diagonal slices,
    computed by the direct definition and via the projected vectors."""
    b, n = lam.shape
    if red is None:
        red = reduction_batch(lam, shift, delta)
    idx = np.arange(n)
    slices = c[:, idx, idx, :].swapaxes(1, 2)          # (b, i, k) = c_kki
    tnorm2 = (slices * slices).sum(axis=2)
    tdiag = slices[:, idx, idx]                         # c_iii
    tsum = slices.sum(axis=2)                           # Delta u_i
    q_direct = 3.0 * tnorm2 - 2.0 * tdiag * tdiag - red["eta"] * tsum * tsum
    de = np.einsum("bij,bij->bi", red["evec"], slices)
    dl = np.einsum("bj,bij->bi", red["lvec"], slices)
    q_vec = 3.0 * tnorm2 - 2.0 * de * de - red["eta"] * dl * dl
    return q_direct, q_vec, tnorm2


@lru_cache(maxsize=None)
def _distinct_triples(n: int):
    trip = np.array(list(itertools.combinations(range(n), 3)), dtype=np.intp)
    return trip.reshape(-1, 3)


def distinct_triple_sum(c: np.ndarray) -> np.ndarray:
    """sum over i > j > k of c_ijk^2, batched."""
    n = c.shape[-1]
    trip = _distinct_triples(n)
    if trip.size == 0:
        return np.zeros(c.shape[0])
    vals = c[:, trip[:, 0], trip[:, 1], trip[:, 2]]
    return (vals * vals).sum(axis=1)


def min_shift_estimate(lam: np.ndarray, delta: float, j_hi: float, iters: int = 24):
    """Smallest J in [0, j_hi] keeping min det of the 2x2 reduction positive
    over the batch, by bisection; None when even j_hi fails."""

    def min_det(j):
        return float(reduction_batch(lam, j, delta)["detQ"].min())

    if min_det(j_hi) <= 0.0:
        return None
    lo, hi = 0.0, j_hi
    if min_det(0.0) > 0.0:
        return 0.0
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if min_det(mid) > 0.0:
            hi = mid
        else:
            lo = mid
    return hi
