"""Dense complex linear algebra used by every other module.

All operators are plain ``numpy`` arrays in row-major layout; for tensor
products the leftmost factor is the most significant index (the ``np.kron``
convention).  Everything here is a pure function of its inputs.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
from math import prod
from typing import Iterable, Sequence

import numpy as np

# Tolerances shared across the package.
HERM_ATOL = 1e-12        # entrywise Hermiticity tolerance
PSD_EIG_FLOOR = -1e-10   # eigenvalues in [floor, 0) are treated as roundoff zeros
SUPPORT_CUTOFF = 1e-12   # eigenvalues below this count as outside the support


def as_matrix(op) -> np.ndarray:
    """Return the underlying ndarray of an operator-like object."""
    m = getattr(op, "matrix", op)
    return np.asarray(m, dtype=np.complex128)


def require_square(a: np.ndarray, what: str = "operator") -> np.ndarray:
    a = np.asarray(a, dtype=np.complex128)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"{what} must be a square matrix, got shape {a.shape}")
    if not np.isfinite(a).all():
        raise ValueError(f"{what} contains non-finite entries")
    return a


def hermitize(a, atol: float = HERM_ATOL) -> np.ndarray:
    """Symmetrize a matrix that is Hermitian up to `atol`; reject otherwise."""
    a = require_square(as_matrix(a))
    gap = np.max(np.abs(a - a.conj().T))
    if gap > atol:
        raise ValueError(f"matrix is not Hermitian (max |A - A^dag| = {gap:.3e})")
    return (a + a.conj().T) / 2


def hermitian_eig(op) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (ascending) and eigenvector columns of a Hermitian operator."""
    h = hermitize(op)
    try:
        w, v = np.linalg.eigh(h)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise ValueError(f"eigendecomposition failed for dimension {h.shape[0]}: {exc}") from exc
    return w, v


def jordan_parts(op) -> tuple[np.ndarray, np.ndarray]:
    """Positive/negative part of a Hermitian operator, H = pos - neg."""
    w, v = hermitian_eig(op)
    pos = (v * np.maximum(w, 0.0)) @ v.conj().T
    neg = (v * np.maximum(-w, 0.0)) @ v.conj().T
    return hermitize(pos, atol=1e-9), hermitize(neg, atol=1e-9)


def psd_sqrt(op) -> np.ndarray:
    """Square root of a PSD operator.  Eigenvalues in [-1e-10, 0) clamp to 0."""
    w, v = hermitian_eig(op)
    if w[0] < PSD_EIG_FLOOR:
        raise ValueError(f"operator is not PSD (eigenvalue {w[0]:.3e})")
    w = np.maximum(w, 0.0)
    return hermitize((v * np.sqrt(w)) @ v.conj().T, atol=1e-9)


def pseudo_inverse_sqrt(op, cutoff: float = SUPPORT_CUTOFF) -> np.ndarray:
    """Inverse square root on the support; eigenvalues <= cutoff map to 0."""
    w, v = hermitian_eig(op)
    inv = np.where(w > cutoff, 1.0 / np.sqrt(np.maximum(w, cutoff)), 0.0)
    return hermitize((v * inv) @ v.conj().T, atol=1e-9)


def support_projector(op, cutoff: float = SUPPORT_CUTOFF) -> np.ndarray:
    """Projector onto the span of eigenvectors with eigenvalue above cutoff."""
    w, v = hermitian_eig(op)
    cols = v[:, w > cutoff]
    return cols @ cols.conj().T


@dataclass(frozen=True)
class TensorFactorization:
    """Ordered subsystem dimensions; leftmost factor is most significant."""

    factor_dims: tuple[int, ...]

    def __post_init__(self):
        dims = tuple(int(d) for d in self.factor_dims)
        if not dims or any(d < 1 for d in dims):
            raise ValueError(f"factor dimensions must be positive, got {dims}")
        object.__setattr__(self, "factor_dims", dims)

    @property
    def total_dim(self) -> int:
        return prod(self.factor_dims)

    def __len__(self) -> int:
        return len(self.factor_dims)


def partial_trace(op, factors, keep: Iterable[int]) -> np.ndarray:
    """Trace out every tensor factor not listed in `keep`.

    `factors` is a TensorFactorization or a sequence of dimensions.
    """
    dims = list(factors.factor_dims if isinstance(factors, TensorFactorization) else factors)
    a = require_square(as_matrix(op))
    if a.shape[0] != prod(dims):
        raise ValueError(f"operator dimension {a.shape[0]} != product of factors {prod(dims)}")
    keep = sorted(set(int(k) for k in keep))
    if any(k < 0 or k >= len(dims) for k in keep):
        raise ValueError(f"keep indices {keep} out of range for {len(dims)} factors")
    t = a.reshape(*dims, *dims)
    remaining = list(range(len(dims)))
    for i in sorted(set(range(len(dims))) - set(keep), reverse=True):
        pos = remaining.index(i)
        t = np.trace(t, axis1=pos, axis2=pos + len(remaining))
        remaining.pop(pos)
    d_keep = prod(dims[k] for k in keep) if keep else 1
    return t.reshape(d_keep, d_keep)


def kron(*ops) -> np.ndarray:
    """Tensor product of one or more matrices (leftmost most significant)."""
    mats = [np.asarray(as_matrix(o)) for o in ops]
    if not mats:
        raise ValueError("kron needs at least one operator")
    return reduce(np.kron, mats)


def lift(op, dims: Sequence[int], site: int) -> np.ndarray:
    """Embed a single-site operator into a tensor product of registers."""
    mats = [np.eye(d, dtype=np.complex128) for d in dims]
    mats[site] = as_matrix(op)
    return kron(*mats)


def commutator(a, b) -> np.ndarray:
    a, b = as_matrix(a), as_matrix(b)
    if a.shape[1] != b.shape[0] or b.shape[1] != a.shape[0]:
        raise ValueError(f"dimension mismatch in commutator: {a.shape} vs {b.shape}")
    return a @ b - b @ a


def trace_norm(op) -> float:
    """Sum of singular values."""
    return float(np.sum(np.linalg.svd(as_matrix(op), compute_uv=False)))


def operator_norm(op) -> float:
    """Largest singular value."""
    s = np.linalg.svd(as_matrix(op), compute_uv=False)
    return float(s[0]) if s.size else 0.0


def spectral_spread(op) -> float:
    """Difference between the largest and smallest eigenvalue."""
    w = np.linalg.eigvalsh(hermitize(op, atol=1e-9))
    return float(w[-1] - w[0])


def dagger(a) -> np.ndarray:
    return as_matrix(a).conj().T


def is_unitary(u, atol: float = 1e-9) -> bool:
    u = as_matrix(u)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        return False
    return bool(np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0]))) <= atol)
