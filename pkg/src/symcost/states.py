"""Density matrices, test ensembles, and the distance/entropy toolkit.

Entropies are in nats throughout; the CLI converts to bits where it reports.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .linalg import (
    HERM_ATOL,
    PSD_EIG_FLOOR,
    SUPPORT_CUTOFF,
    as_matrix,
    hermitize,
    hermitian_eig,
    kron,
    psd_sqrt,
    require_square,
)

TRACE_ATOL = 1e-10


@dataclass(frozen=True)
class DensityMatrix:
    """Unit-trace PSD operator.  The constructor symmetrizes and validates."""

    matrix: np.ndarray

    def __post_init__(self):
        m = hermitize(require_square(as_matrix(self.matrix), "density matrix"))
        tr = float(np.trace(m).real)
        if abs(tr - 1.0) > TRACE_ATOL:
            raise ValueError(f"density matrix trace {tr} is not 1")
        w = np.linalg.eigvalsh(m)
        if w[0] < PSD_EIG_FLOOR:
            raise ValueError(f"density matrix is not PSD (eigenvalue {w[0]:.3e})")
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @classmethod
    def from_vector(cls, vec) -> "DensityMatrix":
        v = np.asarray(vec, dtype=np.complex128).reshape(-1)
        n = np.linalg.norm(v)
        if n == 0:
            raise ValueError("zero vector is not a state")
        v = v / n
        return cls(np.outer(v, v.conj()))

    def purity(self) -> float:
        return float(np.trace(self.matrix @ self.matrix).real)


@dataclass(frozen=True)
class TestEnsemble:
    """Weighted list of states used to probe the irreversibility of a channel."""

    weights: tuple[float, ...]
    states: tuple[DensityMatrix, ...]

    def __post_init__(self):
        w = tuple(float(x) for x in self.weights)
        states = tuple(self.states)
        if len(w) != len(states) or len(w) < 2:
            raise ValueError("ensemble needs matching weights/states lists of length >= 2")
        if any(x < -1e-12 for x in w):
            raise ValueError(f"negative weight in {w}")
        if abs(sum(w) - 1.0) > TRACE_ATOL:
            raise ValueError(f"weights sum to {sum(w)}, expected 1")
        dims = {s.dim for s in states}
        if len(dims) != 1:
            raise ValueError(f"ensemble states have mixed dimensions {dims}")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "states", states)

    @property
    def dim(self) -> int:
        return self.states[0].dim

    def __len__(self) -> int:
        return len(self.weights)

    def average_state(self) -> np.ndarray:
        return sum(p * s.matrix for p, s in zip(self.weights, self.states))


def _check_same_dim(a: np.ndarray, b: np.ndarray):
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")


def fidelity(rho, sigma) -> float:
    """Uhlmann fidelity Tr sqrt(sqrt(sigma) rho sqrt(sigma)), in [0, 1]."""
    r, s = as_matrix(rho), as_matrix(sigma)
    _check_same_dim(r, s)
    rs = psd_sqrt(s)
    mid = hermitize(rs @ r @ rs, atol=1e-9)
    w = np.clip(np.linalg.eigvalsh(mid), 0.0, None)
    return float(min(1.0, np.sum(np.sqrt(w))))


def purified_distance(rho, sigma) -> float:
    f = fidelity(rho, sigma)
    return math.sqrt(max(0.0, 1.0 - f * f))


def trace_distance(rho, sigma) -> float:
    r, s = as_matrix(rho), as_matrix(sigma)
    _check_same_dim(r, s)
    w = np.linalg.eigvalsh(hermitize(r - s, atol=1e-9))
    return float(np.sum(np.abs(w)) / 2)


def von_neumann_entropy(rho) -> float:
    """S(rho) = -Tr[rho ln rho] in nats."""
    w = np.linalg.eigvalsh(as_matrix(rho))
    w = w[w > SUPPORT_CUTOFF]
    return float(-np.sum(w * np.log(w)))


def relative_entropy(rho, sigma) -> float:
    """D(rho || sigma) in nats; +inf when supp(rho) leaks outside supp(sigma)."""
    r, s = as_matrix(rho), as_matrix(sigma)
    _check_same_dim(r, s)
    ws, vs = hermitian_eig(s)
    r_in_s = vs.conj().T @ r @ vs
    pops = np.clip(np.real(np.diag(r_in_s)), 0.0, None)
    outside = pops[ws <= SUPPORT_CUTOFF].sum()
    if outside > 1e-10:
        return math.inf
    inside = ws > SUPPORT_CUTOFF
    cross = float(np.sum(pops[inside] * np.log(ws[inside])))
    return -von_neumann_entropy(r) - cross


def gibbs_state(h, beta: float) -> DensityMatrix:
    """exp(-beta H) / Z, stabilized by shifting the extremal eigenvalue."""
    if not math.isfinite(beta):
        raise ValueError("beta must be finite")
    w, v = hermitian_eig(h)
    expo = -beta * w
    weights = np.exp(expo - expo.max())
    weights /= weights.sum()
    return DensityMatrix((v * weights) @ v.conj().T)


def maximally_entangled(dim: int) -> DensityMatrix:
    """|Omega><Omega| with Omega = sum_i |ii> / sqrt(dim) on dim x dim."""
    if dim < 1:
        raise ValueError("dim must be >= 1")
    vec = np.zeros(dim * dim, dtype=np.complex128)
    vec[:: dim + 1] = 1.0 / math.sqrt(dim)
    return DensityMatrix.from_vector(vec)


def haar_random_pure(dim: int, seed) -> DensityMatrix:
    """Haar-random pure state from a seeded generator (normalized Gaussians)."""
    from .rand import generator, haar_pure_vector

    return DensityMatrix.from_vector(haar_pure_vector(dim, generator(seed)))


def basis_state(dim: int, index: int) -> DensityMatrix:
    vec = np.zeros(dim, dtype=np.complex128)
    vec[index] = 1.0
    return DensityMatrix.from_vector(vec)


def product_state(*states) -> DensityMatrix:
    return DensityMatrix(kron(*[as_matrix(s) for s in states]))
