"""Elementary symmetric polynomial algebra and small dense symmetric
eigen-decomposition.

Spectra hold real Hessian eigenvalues; sigma_k is evaluated by the stable
coefficient DP of prod(1 + lam_i t), which is O(n k) and well behaved for
mixed-sign eigenvalues.  The eigensolver is an in-repo cyclic Jacobi
iteration (matrices here never exceed dim 64).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tolerances as tol
from .backend import kernels
from .errors import DomainError, NumericalError, SingularityError


def _readonly(a):
    out = np.array(a, dtype=np.float64, copy=True)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class Spectrum:
    """Ordered list of n real eigenvalues with symmetric-function accessors."""

    values: np.ndarray

    def __post_init__(self):
        v = _readonly(self.values)
        if v.ndim != 1:
            raise DomainError("spectrum values must be one-dimensional")
        if v.size < 2:
            raise DomainError("a spectrum needs at least two eigenvalues")
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return int(self.values.size)

    def sorted_desc(self) -> np.ndarray:
        """Eigenvalues in non-increasing order; stored order is untouched."""
        return _readonly(np.sort(self.values)[::-1])

    def sorted_asc(self) -> np.ndarray:
        return _readonly(np.sort(self.values))

    def esp(self) -> np.ndarray:
        """All elementary symmetric polynomials sigma_0..sigma_n."""
        return kernels.esp_batch(self.values[None, :])[0]

    @property
    def sigma1(self) -> float:
        return float(self.values.sum())

    @property
    def norm_sq(self) -> float:
        return float((self.values * self.values).sum())


def sigma_k(s: Spectrum, k: int) -> float:
    """k-th elementary symmetric polynomial of the spectrum (sigma_0 = 1)."""
    if not 0 <= k <= s.n:
        raise DomainError(f"sigma_k order k={k} outside 0..{s.n}")
    return float(s.esp()[k])


def sigma_k_partial(s: Spectrum, k: int, i: int) -> float:
    """sigma_{k-1} of the spectrum with the i-th eigenvalue removed.

    For k = 2 this is the linearization coefficient f_i = sigma_1 - lam_i.
    Index i is 0-based.
    """
    if not 1 <= k <= s.n:
        raise DomainError(f"sigma_k_partial order k={k} outside 1..{s.n}")
    if not 0 <= i < s.n:
        raise DomainError(f"eigenvalue index {i} outside 0..{s.n - 1}")
    drop = kernels.esp_drop1_batch(s.values[None, :])[0]
    return float(drop[i, k - 1])


def quotient(s: Spectrum, k: int, l: int) -> float:
    """sigma_k / sigma_l.  Raises SingularityError on a vanishing sigma_l."""
    if not 0 <= l < k <= s.n:
        raise DomainError(f"quotient orders need 0 <= l < k <= n, got k={k}, l={l}")
    e = s.esp()
    den = float(e[l])
    if abs(den) <= tol.SIGMA_DENOM_FLOOR:
        raise SingularityError(f"sigma_{l} vanished in quotient", value=den)
    return float(e[k]) / den


def _packed_size(dim: int) -> int:
    return dim * (dim + 1) // 2


@dataclass(frozen=True)
class SymmetricMatrix:
    """Dense symmetric matrix stored as its packed upper triangle, so the
    symmetry is exact by construction."""

    dim: int
    upper: np.ndarray

    def __post_init__(self):
        if self.dim < 2:
            raise DomainError("symmetric matrices here have dim >= 2")
        u = _readonly(self.upper)
        if u.shape != (_packed_size(self.dim),):
            raise DomainError("packed upper triangle has the wrong length")
        object.__setattr__(self, "upper", u)

    @classmethod
    def from_dense(cls, m) -> "SymmetricMatrix":
        m = np.asarray(m, dtype=np.float64)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise DomainError("expected a square matrix")
        iu = np.triu_indices(m.shape[0])
        return cls(dim=m.shape[0], upper=m[iu])

    @classmethod
    def diagonal(cls, values) -> "SymmetricMatrix":
        return cls.from_dense(np.diag(np.asarray(values, dtype=np.float64)))

    def dense(self) -> np.ndarray:
        out = np.zeros((self.dim, self.dim))
        iu = np.triu_indices(self.dim)
        out[iu] = self.upper
        il = (iu[1], iu[0])
        out[il] = self.upper
        return out

    @property
    def entries(self) -> np.ndarray:
        return self.dense()


def order_eigh(w: np.ndarray, v: np.ndarray):
    """Ascending eigenvalue order plus a deterministic eigenvector sign
    (largest-magnitude component made positive)."""
    order = np.argsort(w, kind="stable")
    w = w[order]
    v = v[:, order]
    for j in range(v.shape[1]):
        col = v[:, j]
        lead = int(np.argmax(np.abs(col)))
        if col[lead] < 0.0:
            v[:, j] = -col
    return w, v


def eigen_sym(m: SymmetricMatrix):
    """Eigen-decomposition by cyclic Jacobi rotations.

    Returns (Spectrum of ascending eigenvalues, orthonormal eigenvector
    columns Q) with Q D Q^T reproducing the matrix.  Deterministic for a
    fixed input; non-convergence within the sweep budget is a bug sentinel.
    """
    if m.dim > 64:
        raise DomainError("eigen_sym supports dim <= 64")
    dense = m.dense()
    try:
        w, v = kernels.jacobi_eigh(dense, tol.EIG_MAX_SWEEPS, tol.EIG_OFF_TOL)
    except RuntimeError as exc:
        raise NumericalError(str(exc)) from exc
    w, v = order_eigh(np.asarray(w), np.asarray(v))
    ortho = np.abs(v.T @ v - np.eye(m.dim)).max()
    if ortho > tol.EIG_ORTHO_MAX:
        raise NumericalError(f"eigenbasis lost orthonormality: {ortho:.3e}")
    scale = 1.0 + np.abs(dense).max()
    recon = np.abs((v * w) @ v.T - dense).max()
    if recon > tol.EIG_RECON_REL * scale:
        raise NumericalError(f"eigen reconstruction error {recon:.3e} exceeds budget")
    return Spectrum(values=w), v


def eigvals_sym_batch(mats: np.ndarray) -> np.ndarray:
    """Ascending eigenvalues of a batch of symmetric matrices (B, d, d)."""
    try:
        w, _ = kernels.jacobi_eigh_batch(mats, tol.EIG_MAX_SWEEPS, tol.EIG_OFF_TOL)
    except RuntimeError as exc:
        raise NumericalError(str(exc)) from exc
    return np.sort(np.asarray(w), axis=1)


def eigh_sym_batch(mats: np.ndarray):
    """Ascending eigenpairs of a batch of symmetric matrices."""
    try:
        w, v = kernels.jacobi_eigh_batch(mats, tol.EIG_MAX_SWEEPS, tol.EIG_OFF_TOL)
    except RuntimeError as exc:
        raise NumericalError(str(exc)) from exc
    w = np.asarray(w)
    v = np.asarray(v)
    order = np.argsort(w, axis=1, kind="stable")
    w = np.take_along_axis(w, order, axis=1)
    v = np.take_along_axis(v, order[:, None, :], axis=2)
    return w, v
