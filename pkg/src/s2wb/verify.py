"""Chunked batch verification drivers behind the CLI subcommands.

Each driver splits its sample budget into fixed-size chunks with per-chunk
RNG substreams keyed by (seed, family, chunk index) and merges the chunk
summaries in index order, so reported margins are bit-identical for any
worker count.
"""
from __future__ import annotations

import math

import numpy as np

from . import tolerances as tol
from ._parallel import chunk_sizes, ordered_map
from .backend import kernels
from .errors import DomainError
from .jacobicert import (
    DEFAULT_EPSILON,
    default_lam_max,
    default_shift,
    det_bound_batch,
    distinct_triple_sum,
    min_shift_estimate,
    qform_slices_batch,
    random_tensor_batch,
    ray_lambda_batch,
    reduction_batch,
    sample_lambda_batch,
    tangency_residual,
)
from .legendre import TransformConfig, batch_transform, q_batch, q_ellipticity_batch
from .report import CheckAgg

_FAMILY_JACOBI_LAMBDA = 0
_FAMILY_JACOBI_TENSOR = 1
_FAMILY_REMARK_RATIO = 2
_FAMILY_TRANSFORM = 3
_FAMILY_CONCAVITY = 4


# ---------------------------------------------------------------------------
# Jacobi certificate verification
# ---------------------------------------------------------------------------

def _jacobi_chunk(n, k_floor, size, seed, chunk_idx, shift, delta, lam_max, pin_prob):
    lams = sample_lambda_batch(n, k_floor, size, (seed, _FAMILY_JACOBI_LAMBDA, chunk_idx),
                               lam_max, pin_prob)
    rng = np.random.default_rng(np.random.SeedSequence((seed, _FAMILY_JACOBI_TENSOR, chunk_idx)))
    raw = random_tensor_batch(rng, size, n)
    s1 = lams.sum(axis=1)
    f = s1[:, None] - lams
    c = kernels.tangency_project(f, raw)

    e = kernels.esp_batch(lams)
    out = {"lams": lams}
    out["sigma2_margin"] = tol.SAMPLE_SIGMA2_TOL - np.abs(e[:, 2] - 1.0)
    if math.isfinite(k_floor):
        out["floor_margin"] = lams.min(axis=1) + k_floor + tol.SEMICONVEXITY_SLACK
    cmax = np.abs(c).max(axis=(1, 2, 3))
    tang = np.abs(tangency_residual(f, c)).max(axis=1)
    out["tangency_margin"] = tol.TANGENCY_TOL * (1.0 + np.abs(f).max(axis=1) * cmax) - tang

    out["ellipticity_margin"] = f.min(axis=1)

    excess = kernels.excess_batch(lams, c, shift, delta)
    out["excess"] = excess
    out["excess_margin"] = excess - tol.EXCESS_FLOOR
    i0 = int(np.argmin(excess))
    out["excess_witness"] = {"lambda": lams[i0].tolist(), "excess": float(excess[i0]),
                             "jet_tensor": c[i0].tolist()}

    red = reduction_batch(lams, shift, delta)
    gram_dev = np.maximum(np.abs(red["normE2"] - red["normE2_direct"]),
                          np.abs(red["EdotL"] - red["EdotL_direct"]))
    gram_dev = np.maximum(gram_dev, np.abs(red["normL2"] - red["normL2_direct"])[:, None])
    out["gram_margin"] = tol.GRAM_IDENTITY_TOL * 2.0 - gram_dev

    trq, detq = red["trQ"], red["detQ"]
    chain = 3.0 - delta * red["f"] / (red["s1"] + shift)[:, None]
    out["trace_margin"] = np.minimum(trq, chain)
    disc = trq * trq - 4.0 * detq
    out["disc_margin"] = disc + tol.DISCRIMINANT_SLACK
    tr_dev = np.abs(trq - red["tr_oracle"]) - tol.REDUCTION_ORACLE_TOL * (1.0 + np.abs(trq))
    det_dev = np.abs(detq - red["det_oracle"]) - tol.REDUCTION_ORACLE_TOL * (1.0 + np.abs(detq))
    out["oracle_margin"] = -np.maximum(tr_dev, det_dev)

    lhs, rhs = det_bound_batch(lams, shift, detq)
    out["detbound_margin"] = lhs - rhs + tol.DET_BOUND_SLACK * (1.0 + np.abs(lhs))
    out["rhs"] = rhs

    qdir, qvec, tnorm2 = qform_slices_batch(lams, c, shift, delta, red)
    qscale = 1.0 + 3.0 * tnorm2
    out["qform_margin"] = tol.GRAM_IDENTITY_TOL * qscale - np.abs(qdir - qvec)
    disc_cl = np.sqrt(np.maximum(disc, 0.0))
    xi_min = 0.5 * (trq - disc_cl)
    xi_max = 0.5 * (trq + disc_cl)
    slack = 1e-9 * qscale
    lower = np.minimum(xi_min, 3.0) * tnorm2
    upper = np.maximum(xi_max, 3.0) * tnorm2
    out["qeig_margin"] = np.minimum(qdir - lower + slack, upper - qdir + slack)

    # exact regrouping: (s1 + J) excess = 6*sum_{i>j>k} c^2 + sum_i Q_i
    lhs_dec = (red["s1"] + shift) * excess
    rhs_dec = 6.0 * distinct_triple_sum(c) + qdir.sum(axis=1)
    dec_scale = 1.0 + np.abs(lhs_dec) + np.abs(rhs_dec)
    out["decomp_margin"] = tol.DECOMPOSITION_IDENTITY * dec_scale - np.abs(lhs_dec - rhs_dec)

    out["det_nonpositive"] = int((detq <= 0.0).sum())
    out["pinned"] = int((lams == -k_floor).any(axis=1).sum()) if math.isfinite(k_floor) else 0
    return out


def run_jacobi_verification(n, k_semiconvex, samples, seed, shift=None,
                            epsilon=DEFAULT_EPSILON, lam_max=None, pin_prob=0.25,
                            workers=1, probe_min_shift=True):
    """Sampler + jet projection + quadratic-form cross-checks + excess and
    determinant bounds over `samples` seeded draws.  Returns (checks, extras)."""
    if samples < 1:
        raise DomainError("samples must be >= 1")
    standard_shift = math.isfinite(k_semiconvex) and shift is None
    if shift is None:
        if not math.isfinite(k_semiconvex):
            raise DomainError("unbounded mode needs an explicit --j-override")
        shift = default_shift(n, k_semiconvex)
    delta = 1.0 + epsilon
    if lam_max is None:
        lam_max = default_lam_max(k_semiconvex)

    def work(task):
        idx, size = task
        return _jacobi_chunk(n, k_semiconvex, size, seed, idx, shift, delta, lam_max, pin_prob)

    chunks = ordered_map(work, chunk_sizes(samples), workers)

    checks = {
        "sigma2_constraint": CheckAgg("sigma2_constraint", f"|sigma_2-1| <= {tol.SAMPLE_SIGMA2_TOL}"),
        "semiconvexity": CheckAgg("semiconvexity", "min lam >= -K - slack"),
        "tangency": CheckAgg("tangency", f"|<Df, t_k>| <= {tol.TANGENCY_TOL} rel"),
        "ellipticity": CheckAgg("ellipticity", "f_i = sigma_1 - lam_i > 0 strictly"),
        "jacobi_excess": CheckAgg("jacobi_excess", f"excess >= {tol.EXCESS_FLOOR}"),
        "gram_identities": CheckAgg("gram_identities", "projected norms match closed forms"),
        "trace_positive": CheckAgg("trace_positive", "tr > 3 - delta f_i/(s1+J) > 0"),
        "discriminant": CheckAgg("discriminant", "tr^2 >= 4 det"),
        "reduction_oracle": CheckAgg("reduction_oracle", f"(tr,det) vs projected form, {tol.REDUCTION_ORACLE_TOL} rel"),
        "det_lower_bound": CheckAgg("det_lower_bound", "lhs >= rhs - slack"),
        "qform_crosscheck": CheckAgg("qform_crosscheck", "direct Q vs projected-vector Q"),
        "qform_eigen_bound": CheckAgg("qform_eigen_bound", "xi_min |t|^2 <= Q <= xi_max |t|^2"),
        "decomposition_identity": CheckAgg("decomposition_identity", "(s1+J) excess regrouping"),
    }
    if standard_shift:
        checks["det_rhs_positive"] = CheckAgg("det_rhs_positive", "rhs > 0 at J = 8nK/3")
    if not math.isfinite(k_semiconvex):
        del checks["semiconvexity"]

    margin_keys = {
        "sigma2_constraint": "sigma2_margin",
        "semiconvexity": "floor_margin",
        "tangency": "tangency_margin",
        "ellipticity": "ellipticity_margin",
        "jacobi_excess": "excess_margin",
        "gram_identities": "gram_margin",
        "trace_positive": "trace_margin",
        "discriminant": "disc_margin",
        "reduction_oracle": "oracle_margin",
        "det_lower_bound": "detbound_margin",
        "qform_crosscheck": "qform_margin",
        "qform_eigen_bound": "qeig_margin",
        "decomposition_identity": "decomp_margin",
        "det_rhs_positive": "rhs",
    }

    det_nonpositive = 0
    pinned = 0
    min_excess = float("inf")
    for ch in chunks:
        lams = ch["lams"]
        for name, agg in checks.items():
            key = margin_keys[name]
            if key not in ch:
                continue
            margins = ch[key]
            if name == "jacobi_excess":
                # the chunk argmin is the row stashed by the chunk worker
                agg.update(margins, lambda i, W=ch["excess_witness"]: W)
            elif margins.ndim == 1:
                agg.update(margins, lambda i, L=lams: {"lambda": L[i].tolist()})
            else:
                agg.update(margins, lambda i, L=lams, k=margins.shape[1]: {
                    "lambda": L[i // k].tolist(), "i": int(i % k)})
        det_nonpositive += ch["det_nonpositive"]
        pinned += ch["pinned"]
        min_excess = min(min_excess, float(ch["excess"].min()))

    extras = {
        "shift": shift,
        "epsilon": epsilon,
        "delta": delta,
        "min_excess": min_excess,
        "pinned_samples": pinned,
        "det_nonpositive_count": det_nonpositive,
    }
    if shift == 0.0 and n >= 4:
        extras["shift_necessity_probe"] = {
            "description": "count of 2x2 determinants <= 0 at J = 0 (evidence the shift matters; absence asserts nothing)",
            "violations_found": det_nonpositive,
        }
    if probe_min_shift and chunks:
        extras["empirical_min_shift_first_chunk"] = min_shift_estimate(
            chunks[0]["lams"], delta, max(shift, 1.0))
    return list(checks.values()), extras


# ---------------------------------------------------------------------------
# three-dimensional unshifted remark: ratio sigma_1 / (-lam_3) > 3
# ---------------------------------------------------------------------------

def _remark_chunk(size, seed, chunk_idx):
    rng = np.random.default_rng(np.random.SeedSequence((seed, _FAMILY_REMARK_RATIO, chunk_idx)))
    prod = 1.0 + np.exp(rng.uniform(-6.0, 8.0, size))
    ratio_12 = np.exp(rng.uniform(0.0, 6.0, size))
    lam1 = np.sqrt(prod * ratio_12)
    lam2 = np.sqrt(prod / ratio_12)
    lam3 = (1.0 - prod) / (lam1 + lam2)
    ratio = -1.0 + (lam1 + lam2) ** 2 / (prod - 1.0)
    amgm = -1.0 + 4.0 * prod / (prod - 1.0)
    lams = np.stack([lam1, lam2, lam3], axis=1)
    e = kernels.esp_batch(lams)
    scale = 1.0 + prod
    return {
        "lams": lams,
        "ratio_margin": ratio - 3.0,
        "amgm_margin": ratio - amgm + 1e-12 * scale,
        "subst_margin": 1e-12 * scale - np.abs(e[:, 2] - 1.0),
    }


def run_remark_ratio(samples, seed, workers=1):
    """ratio = sigma_1/(-lam_3) > 3 strictly for lam_1 lam_2 > 1, with the
    AM-GM chain and the sigma_2 = 1 substitution as oracles."""

    def work(task):
        idx, size = task
        return _remark_chunk(size, seed, idx)

    chunks = ordered_map(work, chunk_sizes(samples), workers)
    checks = {
        "remark_ratio": CheckAgg("remark_ratio", "sigma_1/(-lam_3) > 3 strictly"),
        "remark_amgm": CheckAgg("remark_amgm", "ratio >= -1 + 4 l1 l2/(l1 l2 - 1)"),
        "remark_substitution": CheckAgg("remark_substitution", "sigma_2(l1,l2,l3) = 1"),
    }
    for ch in chunks:
        lams = ch["lams"]
        checks["remark_ratio"].update(ch["ratio_margin"], lambda i, L=lams: {"lambda": L[i].tolist()})
        checks["remark_amgm"].update(ch["amgm_margin"], lambda i, L=lams: {"lambda": L[i].tolist()})
        checks["remark_substitution"].update(ch["subst_margin"], lambda i, L=lams: {"lambda": L[i].tolist()})
    return list(checks.values()), {}


# ---------------------------------------------------------------------------
# Legendre-Lewy transform verification
# ---------------------------------------------------------------------------

def _transform_margins(lams, cfg):
    out = batch_transform(lams, cfg)
    mu = out["mu"]
    res = {
        "lams": lams,
        "mu": mu,
        "residual_margin": tol.TRANSFORM_RESIDUAL_TOL - np.abs(out["residual"]),
        "factor_margin": tol.RESIDUAL_FACTOR_TOL * out["factor_scale"] - out["factor_dev"],
        "trace_margin": tol.TRACE_IDENTITY_TOL * out["trace_scale"] - out["trace_dev"],
        "quotient_margin": tol.QUOTIENT_IDENTITY_TOL - out["quotient_dev"],
        "mu_range_margin": np.minimum(mu[:, 0], 1.0 - mu[:, -1]),
    }
    dq = q_ellipticity_batch(mu)
    res["ellipticity_margin"] = dq.min(axis=1)
    step = 1e-6 * (1.0 + mu)
    fd = np.empty_like(dq)
    for i in range(mu.shape[1]):
        up = mu.copy()
        dn = mu.copy()
        up[:, i] += step[:, i]
        dn[:, i] -= step[:, i]
        fd[:, i] = (q_batch(up) - q_batch(dn)) / (2.0 * step[:, i])
    res["fd_margin"] = tol.Q_FD_REL * np.abs(dq) - np.abs(dq - fd)
    res["dq"] = dq
    return res


def _transform_chunk(n, k_floor, size, seed, chunk_idx, cfg, lam_max, pin_prob):
    lams = sample_lambda_batch(n, k_floor, size, (seed, _FAMILY_TRANSFORM, chunk_idx),
                               lam_max, pin_prob)
    return _transform_margins(lams, cfg)


def _concavity_chunk(n, size, seed, chunk_idx, mu_source):
    rng = np.random.default_rng(np.random.SeedSequence((seed, _FAMILY_CONCAVITY, chunk_idx)))
    pick = rng.integers(0, mu_source.shape[0], size=(size, 2))
    mu1 = mu_source[pick[:, 0]]
    mu2 = mu_source[pick[:, 1]]
    gap = q_batch(0.5 * (mu1 + mu2)) - 0.5 * (q_batch(mu1) + q_batch(mu2))
    return gap + tol.Q_CONCAVITY_SLACK


def run_transform_verification(n, k_semiconvex, samples, seed, kbar=None,
                               lam_max=None, pin_prob=0.25, ray=False,
                               ray_count=1024, concavity_pairs=10000, workers=1):
    """Image-equation residual, trace and quotient identities, eigenvalue
    rectangle, ellipticity of q (exact vs finite differences) and sampled
    midpoint concavity.  Returns (checks, extras)."""
    if samples < 1:
        raise DomainError("samples must be >= 1")
    if kbar is None:
        cfg = TransformConfig(n=n, K=k_semiconvex)
    else:
        cfg = TransformConfig(n=n, K=k_semiconvex, kbar=kbar)
    if lam_max is None:
        lam_max = default_lam_max(k_semiconvex)

    def work(task):
        idx, size = task
        return _transform_chunk(n, k_semiconvex, size, seed, idx, cfg, lam_max, pin_prob)

    chunks = ordered_map(work, chunk_sizes(samples), workers)

    checks = {
        "residual": CheckAgg("residual", f"|H(mu)| <= {tol.TRANSFORM_RESIDUAL_TOL} on-manifold"),
        "residual_factorization": CheckAgg("residual_factorization",
                                           "sigma_n (sigma_2(lam) - 1) = -residual"),
        "trace_identity": CheckAgg("trace_identity", "Delta u + n Kbar = sum 1/mu_i"),
        "quotient_identity": CheckAgg("quotient_identity", "q = (A1 - A2 a^3)^{-1}"),
        "mu_range": CheckAgg("mu_range", "0 < mu_i < 1"),
        "ellipticity_positive": CheckAgg("ellipticity_positive", "dq/dmu_i > 0"),
        "ellipticity_fd": CheckAgg("ellipticity_fd", f"FD agreement {tol.Q_FD_REL} rel"),
        "concavity": CheckAgg("concavity", "midpoint concavity of q"),
    }
    margin_keys = {
        "residual": "residual_margin",
        "residual_factorization": "factor_margin",
        "trace_identity": "trace_margin",
        "quotient_identity": "quotient_margin",
        "mu_range": "mu_range_margin",
        "ellipticity_positive": "ellipticity_margin",
        "ellipticity_fd": "fd_margin",
    }

    c_top = -float("inf")
    c_rest = float("inf")
    dq_min = float("inf")
    dq_max = -float("inf")
    mu_pool = []
    for ch in chunks:
        lams = ch["lams"]
        for name, key in margin_keys.items():
            margins = ch[key]
            if margins.ndim == 1:
                checks[name].update(margins, lambda i, L=lams: {"lambda": L[i].tolist()})
            else:
                checks[name].update(margins, lambda i, L=lams, k=margins.shape[1]: {
                    "lambda": L[i // k].tolist(), "i": int(i % k)})
        c_top = max(c_top, float(ch["mu"][:, 0].max()))
        c_rest = min(c_rest, float(ch["mu"][:, 1:].min()))
        dq_min = min(dq_min, float(ch["dq"].min()))
        dq_max = max(dq_max, float(ch["dq"].max()))
        if len(mu_pool) < 8:
            mu_pool.append(ch["mu"])

    mu_source = np.concatenate(mu_pool, axis=0)
    for idx, size in chunk_sizes(concavity_pairs):
        checks["concavity"].update(_concavity_chunk(n, size, seed, idx, mu_source))

    extras = {
        "kbar": cfg.kbar,
        "kbar_rule": cfg.kbar_rule,
        "A1": cfg.A1,
        "A2": cfg.A2,
        "c_top_estimate": c_top,
        "c_rest_estimate": c_rest,
        "ellipticity_bracket": [dq_min, dq_max],
    }

    if ray:
        lams = ray_lambda_batch(n, ray_count)
        ray_res = _transform_margins(lams, cfg)
        checks["ray_identities"] = CheckAgg("ray_identities", "transform identities on the ray family")
        for key in ("residual_margin", "factor_margin", "trace_margin",
                    "quotient_margin", "mu_range_margin"):
            checks["ray_identities"].update(ray_res[key], lambda i, L=lams: {
                "lambda_head": L[min(i, L.shape[0] - 1), :2].tolist()})
        checks["ray_rest_bounded"] = CheckAgg(
            "ray_rest_bounded", "mu_2..mu_n bounded away from 0 along the ray")
        floor = 0.9 / (1.0 + cfg.kbar)
        checks["ray_rest_bounded"].update(ray_res["mu"][:, 1:].min(axis=1) - floor,
                                          lambda i, L=lams: {"lambda_head": L[i, :2].tolist()})
        extras["ray"] = {
            "count": int(ray_count),
            "mu1_min": float(ray_res["mu"][:, 0].min()),
            "mu_rest_min": float(ray_res["mu"][:, 1:].min()),
        }

    return list(checks.values()), extras
