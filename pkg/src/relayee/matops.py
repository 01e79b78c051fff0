"""Complex linear-algebra primitives with fixed spectral ordering.

All decompositions return eigenvalues/singular values sorted in
non-increasing order, which is the convention assumed by every solver in
this package.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Tolerances (overridable by callers that need looser/tighter checks).
HERMITIAN_TOL = 1e-10
UNITARY_TOL = 1e-10
PSD_EIG_FLOOR = -1e-12
PINV_RCOND = 1e-12


class ContractViolation(ValueError):
    """Input does not satisfy an operation's precondition."""


@dataclass(frozen=True)
class SpectralDecomposition:
    basis: np.ndarray      # unitary, columns are eigenvectors
    values: np.ndarray     # real, descending

    def assemble(self) -> np.ndarray:
        return (self.basis * self.values) @ self.basis.conj().T


@dataclass(frozen=True)
class SingularDecomposition:
    left: np.ndarray       # unitary
    values: np.ndarray     # real, descending, >= 0
    right: np.ndarray      # unitary

    def assemble(self) -> np.ndarray:
        m, n = self.left.shape[0], self.right.shape[0]
        sigma = np.zeros((m, n))
        k = len(self.values)
        sigma[:k, :k] = np.diag(self.values)
        return self.left @ sigma @ self.right.conj().T


def _require_finite(m: np.ndarray) -> np.ndarray:
    m = np.asarray(m)
    if not np.all(np.isfinite(m)):
        raise ContractViolation("matrix has non-finite entries")
    return m


def evd_descending(m: np.ndarray, *, tol: float = HERMITIAN_TOL) -> SpectralDecomposition:
    """Eigendecomposition of a Hermitian matrix, eigenvalues descending."""
    m = _require_finite(m)
    scale = max(np.linalg.norm(m), 1.0)
    if np.linalg.norm(m - m.conj().T) > tol * scale:
        raise ContractViolation("matrix is not Hermitian within tolerance")
    vals, vecs = np.linalg.eigh(m)
    # eigh returns ascending order; reversing keeps its tie order stable
    return SpectralDecomposition(basis=vecs[:, ::-1].copy(), values=vals[::-1].copy())


def svd_descending(m: np.ndarray) -> SingularDecomposition:
    """SVD with singular values in descending order (numpy's convention)."""
    m = _require_finite(m)
    u, s, vh = np.linalg.svd(m, full_matrices=True)
    return SingularDecomposition(left=u, values=s, right=vh.conj().T)


def batched_logdet_hpd(mats: np.ndarray) -> np.ndarray:
    """log-determinants of a stack of Hermitian positive-definite matrices.

    Uses cofactor expansion for sizes up to 3 (the common antenna counts),
    where LAPACK's per-matrix overhead dominates, and slogdet otherwise.
    """
    n = mats.shape[-1]
    if n == 1:
        det = mats[..., 0, 0].real
    elif n == 2:
        det = (mats[..., 0, 0] * mats[..., 1, 1]
               - mats[..., 0, 1] * mats[..., 1, 0]).real
    elif n == 3:
        a, b, c = mats[..., 0, 0], mats[..., 0, 1], mats[..., 0, 2]
        d, e, f = mats[..., 1, 0], mats[..., 1, 1], mats[..., 1, 2]
        g, h, i = mats[..., 2, 0], mats[..., 2, 1], mats[..., 2, 2]
        det = (a * (e * i - f * h) - b * (d * i - f * g)
               + c * (d * h - e * g)).real
    else:
        _, ld = np.linalg.slogdet(mats)
        return ld
    return np.log(det)


def batched_inv_small(mats: np.ndarray) -> np.ndarray:
    """Inverses of a stack of small well-conditioned matrices.

    Adjugate formulas for sizes up to 3, LAPACK otherwise; callers are
    responsible for invertibility (no pivoting, no condition checks).
    """
    n = mats.shape[-1]
    if n > 3:
        return np.linalg.inv(mats)
    out = np.empty_like(mats)
    if n == 1:
        out[..., 0, 0] = 1.0 / mats[..., 0, 0]
        return out
    if n == 2:
        a, b = mats[..., 0, 0], mats[..., 0, 1]
        c, d = mats[..., 1, 0], mats[..., 1, 1]
        det = a * d - b * c
        out[..., 0, 0] = d
        out[..., 0, 1] = -b
        out[..., 1, 0] = -c
        out[..., 1, 1] = a
        return out / det[..., None, None]
    a, b, c = mats[..., 0, 0], mats[..., 0, 1], mats[..., 0, 2]
    d, e, f = mats[..., 1, 0], mats[..., 1, 1], mats[..., 1, 2]
    g, h, i = mats[..., 2, 0], mats[..., 2, 1], mats[..., 2, 2]
    c00 = e * i - f * h
    c01 = -(d * i - f * g)
    c02 = d * h - e * g
    c10 = -(b * i - c * h)
    c11 = a * i - c * g
    c12 = -(a * h - b * g)
    c20 = b * f - c * e
    c21 = -(a * f - c * d)
    c22 = a * e - b * d
    det = a * c00 + b * c01 + c * c02
    out[..., 0, 0] = c00
    out[..., 0, 1] = c10
    out[..., 0, 2] = c20
    out[..., 1, 0] = c01
    out[..., 1, 1] = c11
    out[..., 1, 2] = c21
    out[..., 2, 0] = c02
    out[..., 2, 1] = c12
    out[..., 2, 2] = c22
    return out / det[..., None, None]


def pseudo_inverse(m: np.ndarray, *, rcond: float = PINV_RCOND) -> np.ndarray:
    """Moore-Penrose pseudo-inverse with a relative rank cutoff."""
    m = _require_finite(m)
    return np.linalg.pinv(m, rcond=rcond)


def exp_correlation(rho: float, n: int) -> np.ndarray:
    """Exponential correlation matrix: entry (i, j) = rho^|i-j|."""
    if not 0.0 <= rho < 1.0:
        raise ContractViolation(f"correlation index must be in [0, 1), got {rho}")
    if n < 1:
        raise ContractViolation("dimension must be positive")
    idx = np.arange(n)
    return rho ** np.abs(idx[:, None] - idx[None, :]).astype(float)


def sqrt_psd(m: np.ndarray, *, eig_floor: float = PSD_EIG_FLOOR) -> np.ndarray:
    """Hermitian square root of a PSD matrix; eigenvalue dust clamped to 0."""
    dec = evd_descending(m)
    scale = max(float(dec.values[0]), 1.0) if dec.values.size else 1.0
    if np.any(dec.values < eig_floor * scale):
        raise ContractViolation("matrix is not PSD within the eigenvalue floor")
    vals = np.clip(dec.values, 0.0, None)
    return (dec.basis * np.sqrt(vals)) @ dec.basis.conj().T
