"""Pure-NumPy fallback for the hot kernels.

Mirrors the API of the compiled extension ``s2wb._kernels_c``.  The batch
dimension is vectorized; the per-sample arithmetic follows the same update
order as the compiled loops so the two backends agree to rounding.
"""
from __future__ import annotations

import numpy as np

BACKEND = "python"

_JACOBI_MAX_SWEEPS = 50
_JACOBI_OFF_TOL = 1e-14


def esp_batch(vals):
    """Elementary symmetric polynomials sigma_0..sigma_n of each row.

    vals: (B, n) -> (B, n+1), via the coefficient DP of prod(1 + x_i t).
    """
    vals = np.ascontiguousarray(vals, dtype=np.float64)
    b, n = vals.shape
    e = np.zeros((b, n + 1))
    e[:, 0] = 1.0
    for i in range(n):
        x = vals[:, i]
        for j in range(min(i + 1, n), 0, -1):
            e[:, j] += x * e[:, j - 1]
    return e


def esp_drop1_batch(vals):
    """sigma_j of each row with one entry removed.

    vals: (B, n) -> (B, n, n) where out[b, i, j] = sigma_j(row b without
    entry i), j = 0..n-1.
    """
    vals = np.ascontiguousarray(vals, dtype=np.float64)
    b, n = vals.shape
    out = np.zeros((b, n, n))
    for i in range(n):
        e = np.zeros((b, n))
        e[:, 0] = 1.0
        used = 0
        for col in range(n):
            if col == i:
                continue
            x = vals[:, col]
            used += 1
            for j in range(min(used, n - 1), 0, -1):
                e[:, j] += x * e[:, j - 1]
        out[:, i, :] = e
    return out


def _rotation_params(app, aqq, apq, rot):
    theta = np.where(rot, (aqq - app) / np.where(rot, 2.0 * apq, 1.0), 0.0)
    sign = np.where(theta >= 0.0, 1.0, -1.0)
    t = np.where(rot, sign / (np.abs(theta) + np.sqrt(theta * theta + 1.0)), 0.0)
    c = 1.0 / np.sqrt(t * t + 1.0)
    s = t * c
    return c, s


def jacobi_eigh_batch(mats, max_sweeps=_JACOBI_MAX_SWEEPS, off_tol=_JACOBI_OFF_TOL):
    """Cyclic Jacobi diagonalization of a batch of symmetric matrices.

    mats: (B, d, d) -> (eigenvalues (B, d), eigenvector columns (B, d, d)),
    unordered.  Raises RuntimeError when the sweep budget is exhausted.
    """
    a = np.array(mats, dtype=np.float64, copy=True)
    b, d, d2 = a.shape
    if d != d2:
        raise ValueError("matrices must be square")
    v = np.zeros_like(a)
    v[:, np.arange(d), np.arange(d)] = 1.0
    if d == 1:
        return a[:, 0, 0].copy().reshape(b, 1), v
    thr = off_tol * np.maximum(1.0, np.abs(a).max(axis=(1, 2)))
    iu = np.triu_indices(d, k=1)
    converged = False
    for _ in range(max_sweeps):
        active = np.abs(a[:, iu[0], iu[1]]).max(axis=1) > thr
        if not active.any():
            converged = True
            break
        for p in range(d - 1):
            for q in range(p + 1, d):
                apq = a[:, p, q]
                rot = active & (apq != 0.0)
                if not rot.any():
                    continue
                c, s = _rotation_params(a[:, p, p], a[:, q, q], apq, rot)
                colp = a[:, :, p].copy()
                colq = a[:, :, q].copy()
                a[:, :, p] = c[:, None] * colp - s[:, None] * colq
                a[:, :, q] = s[:, None] * colp + c[:, None] * colq
                rowp = a[:, p, :].copy()
                rowq = a[:, q, :].copy()
                a[:, p, :] = c[:, None] * rowp - s[:, None] * rowq
                a[:, q, :] = s[:, None] * rowp + c[:, None] * rowq
                vp = v[:, :, p].copy()
                vq = v[:, :, q].copy()
                v[:, :, p] = c[:, None] * vp - s[:, None] * vq
                v[:, :, q] = s[:, None] * vp + c[:, None] * vq
    else:
        converged = not (np.abs(a[:, iu[0], iu[1]]).max(axis=1) > thr).any()
    if not converged:
        raise RuntimeError("cyclic Jacobi did not converge within the sweep budget")
    w = a[:, np.arange(d), np.arange(d)].copy()
    return w, v


def jacobi_eigh(mat, max_sweeps=_JACOBI_MAX_SWEEPS, off_tol=_JACOBI_OFF_TOL):
    """Single-matrix cyclic Jacobi; see jacobi_eigh_batch."""
    w, v = jacobi_eigh_batch(np.asarray(mat, dtype=np.float64)[None], max_sweeps, off_tol)
    return w[0], v[0]


def tangency_project(f, c):
    """Frobenius-orthogonal projection onto {sum_i f_i c_iik = 0 for all k}.

    f: (B, n) linearization eigenvalues; c: (B, n, n, n) symmetric tensors.
    The k-th constraint touches only multisets {i,i,k}, so the n constraints
    are mutually orthogonal and project independently.  Returns a new array;
    exact index symmetry of the input is preserved bit-for-bit.
    """
    f = np.asarray(f, dtype=np.float64)
    out = np.array(c, dtype=np.float64, copy=True)
    b, n = f.shape
    idx = np.arange(n)
    df2 = (f * f).sum(axis=1)
    r = np.einsum("bi,bik->bk", f, out[:, idx, idx, :])
    denom = (df2[:, None] + 2.0 * f * f) / 3.0
    s = r / denom
    corr = (f[:, :, None] / 3.0) * s[:, None, :]      # (b, i, k), i != k weight
    corr[:, idx, idx] = f * s                          # i == k weight
    for k in range(n):
        ck = corr[:, :, k]
        out[:, idx, idx, k] -= ck
        out[:, idx, k, idx] -= ck
        out[:, k, idx, idx] -= ck
    # the (k,k,k) entry was hit three times; it belongs to one constraint only
    out[:, idx, idx, idx] += 2.0 * corr[:, idx, idx]
    return out


def excess_batch(lam, c, shift, delta):
    """Shifted-trace Jacobi excess (Delta_F b - eps |grad_F b|^2) per jet.

    lam: (B, n) spectra with sigma_2 = 1; c: (B, n, n, n) tangent tensors;
    shift: J; delta: 1 + eps.  Returns (B,).
    """
    lam = np.asarray(lam, dtype=np.float64)
    c = np.asarray(c, dtype=np.float64)
    b, n = lam.shape
    idx = np.arange(n)
    s1 = lam.sum(axis=1)
    denom = s1 + shift
    f = s1[:, None] - lam
    d = c[:, idx, idx, :].sum(axis=1)
    total = (c * c).sum(axis=(1, 2, 3))
    eta = 1.0 + delta * f / denom[:, None]
    return (total - (eta * d * d).sum(axis=1)) / denom
