"""The sigma_2 operator, its branch structure, and its linearization.

On the positive-trace branch of sigma_2(D^2 u) = 1 the linearized
coefficient matrix F = (tr M) I - M is positive definite with eigenvalues
f_i = sigma_1 - lam_i; the negative-trace branch is detected and refused
rather than silently reflected.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from . import tolerances as tol
from .errors import BranchError, DomainError, NumericalError
from .symcore import Spectrum, SymmetricMatrix, eigen_sym, sigma_k


class Branch(enum.Enum):
    POSITIVE_TRACE = "positive-trace"
    NEGATIVE_TRACE = "negative-trace"


@dataclass(frozen=True)
class OperatorPoint:
    """A point on the constraint set sigma_2 = 1: Hessian, its spectrum and
    the trace branch."""

    hessian: SymmetricMatrix
    spectrum: Spectrum
    branch: Branch

    @classmethod
    def from_matrix(cls, m: SymmetricMatrix, constraint_tol: float = tol.OPERATOR_POINT_TOL):
        spectrum, _ = eigen_sym(m)
        return cls._build(m, spectrum, constraint_tol)

    @classmethod
    def from_spectrum(cls, values, constraint_tol: float = tol.OPERATOR_POINT_TOL):
        spectrum = values if isinstance(values, Spectrum) else Spectrum(np.asarray(values, dtype=np.float64))
        return cls._build(SymmetricMatrix.diagonal(spectrum.values), spectrum, constraint_tol)

    @classmethod
    def _build(cls, m, spectrum, constraint_tol):
        s2 = sigma_k(spectrum, 2)
        if abs(s2 - 1.0) > constraint_tol:
            raise DomainError(f"sigma_2 = {s2!r} is off the constraint set (tol {constraint_tol})")
        s1 = spectrum.sigma1
        if s1 > 0.0:
            expected = math.sqrt(2.0 + spectrum.norm_sq)
            if abs(s1 - expected) > constraint_tol * (1.0 + expected):
                raise NumericalError("sigma_1 disagrees with sqrt(2 + |lam|^2) on the positive branch")
            branch = Branch.POSITIVE_TRACE
        else:
            branch = Branch.NEGATIVE_TRACE
        return cls(hessian=m, spectrum=spectrum, branch=branch)


def evaluate_F(m: SymmetricMatrix) -> float:
    """sigma_2 of the eigenvalues via the trace formula
    0.5 [(tr M)^2 - ||M||_F^2]."""
    dense = m.dense()
    tr = float(np.trace(dense))
    fro2 = float((dense * dense).sum())
    return 0.5 * (tr * tr - fro2)


def evaluate_F_eigen(m: SymmetricMatrix) -> float:
    """sigma_2 via the eigenvalue route; cross-checks the trace formula."""
    spectrum, _ = eigen_sym(m)
    return sigma_k(spectrum, 2)


def linearization(p: OperatorPoint) -> SymmetricMatrix:
    """F = (tr M) I - M, positive definite on the positive-trace branch;
    its eigenvalues in the Hessian eigenbasis are f_i = sigma_1 - lam_i."""
    if p.branch is not Branch.POSITIVE_TRACE:
        raise BranchError("linearization is only defined on the positive-trace branch")
    dense = p.hessian.dense()
    f = np.trace(dense) * np.eye(p.hessian.dim) - dense
    fm = SymmetricMatrix.from_dense(f)
    smallest = float(eigen_sym(fm)[0].values[0])
    if smallest <= 0.0:
        raise NumericalError(f"linearization lost positive definiteness (min eig {smallest:.3e})")
    return fm


def grad_F_square(p: OperatorPoint, g) -> float:
    """|grad_F v|^2 for a gradient vector g: g^T F g >= 0."""
    g = np.asarray(g, dtype=np.float64)
    if g.shape != (p.hessian.dim,):
        raise DomainError(f"gradient must have length {p.hessian.dim}")
    f = linearization(p).dense()
    return float(g @ f @ g)


def apply_lap_F(p: OperatorPoint, h) -> float:
    """Frobenius pairing sum_ij F_ij H_ij of the linearization with a
    symmetric second-derivative matrix H."""
    hd = h.dense() if isinstance(h, SymmetricMatrix) else np.asarray(h, dtype=np.float64)
    if hd.shape != (p.hessian.dim, p.hessian.dim):
        raise DomainError("dimension mismatch in apply_lap_F")
    f = linearization(p).dense()
    return float((f * hd).sum())
