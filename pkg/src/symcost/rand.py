"""Seeded random constructions: states, channels, conserving implementations.

Every function takes an explicit `numpy` Generator (or anything `generator`
accepts); nothing touches global RNG state.  Independent streams for batch
work are derived with `generator([master, index, ...])`.
"""

from __future__ import annotations

import numpy as np

from .linalg import as_matrix, hermitize, kron
from .states import DensityMatrix, TestEnsemble, gibbs_state


def generator(seed) -> np.random.Generator:
    """Coerce an int, a sequence of ints, or a Generator into a Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def haar_pure_vector(dim: int, rng: np.random.Generator) -> np.ndarray:
    v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return v / np.linalg.norm(v)


def haar_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed unitary via QR of a Ginibre matrix with phase fix."""
    z = (rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


def random_hermitian(dim: int, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return hermitize((a + a.conj().T) / 2 * scale)


def random_density(dim: int, rng: np.random.Generator, rank: int | None = None) -> DensityMatrix:
    """Full-rank (or fixed-rank) random density matrix, Wishart style."""
    rank = dim if rank is None else rank
    g = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    m = g @ g.conj().T
    return DensityMatrix(m / np.trace(m).real)


def random_pure(dim: int, rng: np.random.Generator) -> DensityMatrix:
    return DensityMatrix.from_vector(haar_pure_vector(dim, rng))


def random_orthogonal_pure_ensemble(
    dim: int, n_states: int, rng: np.random.Generator, uniform: bool = False
) -> TestEnsemble:
    """Mutually orthogonal Haar random pure states with random weights."""
    if n_states > dim:
        raise ValueError(f"cannot fit {n_states} orthogonal states in dimension {dim}")
    u = haar_unitary(dim, rng)
    states = tuple(DensityMatrix.from_vector(u[:, k]) for k in range(n_states))
    if uniform:
        w = np.full(n_states, 1.0 / n_states)
    else:
        w = rng.uniform(0.2, 1.0, size=n_states)
        w = w / w.sum()
    return TestEnsemble(tuple(w), states)


def random_mixed_ensemble(dim: int, n_states: int, rng: np.random.Generator) -> TestEnsemble:
    states = tuple(random_density(dim, rng) for _ in range(n_states))
    w = rng.uniform(0.2, 1.0, size=n_states)
    return TestEnsemble(tuple(w / w.sum()), states)


def integer_charge(dim: int, rng: np.random.Generator, levels: int = 3) -> np.ndarray:
    """Diagonal charge with small integer eigenvalues (degeneracies likely)."""
    return np.diag(rng.integers(0, levels, size=dim).astype(np.complex128))


def block_haar_from_charge(charge_diag: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Haar unitary within each eigenspace of a diagonal charge operator.

    The result commutes with the charge exactly, so any implementation built
    from it conserves the total charge to machine precision.
    """
    x = as_matrix(charge_diag)
    diag = np.real(np.diag(x))
    if np.max(np.abs(x - np.diag(np.diag(x)))) > 1e-12:
        raise ValueError("charge operator must be diagonal in the computational basis")
    dim = x.shape[0]
    u = np.zeros((dim, dim), dtype=np.complex128)
    values = np.unique(np.round(diag, 9))
    for val in values:
        idx = np.flatnonzero(np.abs(diag - val) < 1e-9)
        block = haar_unitary(len(idx), rng)
        u[np.ix_(idx, idx)] = block
    return u


def random_conserving_implementation(
    d_sys: int,
    d_env: int,
    rng: np.random.Generator,
    env_state: str = "haar_pure",
    charge_levels: int = 3,
    beta: float = 1.0,
):
    """Implementation with an exactly conserved additive charge.

    env_state: 'haar_pure' (coherent environment), 'mixed', 'diagonal'
    (coherence-free), or 'gibbs' (thermal at `beta`, also coherence-free).
    """
    from .channels import Implementation

    x_sys = integer_charge(d_sys, rng, charge_levels)
    x_env = integer_charge(d_env, rng, charge_levels)
    total = kron(x_sys, np.eye(d_env)) + kron(np.eye(d_sys), x_env)
    u = block_haar_from_charge(total, rng)
    if env_state == "haar_pure":
        rho_env = random_pure(d_env, rng)
    elif env_state == "mixed":
        rho_env = random_density(d_env, rng)
    elif env_state == "diagonal":
        p = rng.uniform(0.1, 1.0, size=d_env)
        rho_env = DensityMatrix(np.diag(p / p.sum()).astype(np.complex128))
    elif env_state == "gibbs":
        rho_env = gibbs_state(x_env, beta)
    else:
        raise ValueError(f"unknown env_state {env_state!r}")
    return Implementation(
        u=u,
        env_state=rho_env,
        x_sys=x_sys,
        x_env=x_env,
        x_sys_out=x_sys.copy(),
        x_env_out=x_env.copy(),
        dims=(d_sys, d_env, d_sys, d_env),
    )


def random_violated_implementation(
    d_sys: int,
    d_env: int,
    rng: np.random.Generator,
    violation_spread: float = 1.0,
    env_state: str = "haar_pure",
):
    """Conserving implementation with the output charge perturbed.

    The conservation defect is then U^dag (P x I) U for a random Hermitian P,
    whose spectral spread equals `violation_spread`.
    """
    from .channels import Implementation

    impl = random_conserving_implementation(d_sys, d_env, rng, env_state=env_state)
    p = random_hermitian(d_sys, rng)
    w = np.linalg.eigvalsh(p)
    span = float(w[-1] - w[0])
    if span > 0:
        p = p * (violation_spread / span)
    return Implementation(
        u=impl.u,
        env_state=impl.env_state,
        x_sys=impl.x_sys,
        x_env=impl.x_env,
        x_sys_out=impl.x_sys_out + p,
        x_env_out=impl.x_env_out,
        dims=impl.dims,
    )


def random_thermal_implementation(d_sys: int, d_env: int, beta: float, rng: np.random.Generator):
    """Energy-conserving dilation with a Gibbs environment.

    Because U commutes with H_sys + H_env and the joint Gibbs state factorizes,
    the induced channel preserves gibbs_state(H_sys, beta) exactly.
    """
    return random_conserving_implementation(d_sys, d_env, rng, env_state="gibbs", beta=beta)


def random_kraus_channel(
    dim_in: int, dim_out: int, kraus_rank: int, rng: np.random.Generator
):
    """Random channel from a Haar isometry into output x environment."""
    from .channels import KrausChannel

    total = dim_out * kraus_rank
    if total < dim_in:
        raise ValueError("dim_out * kraus_rank must be >= dim_in")
    u = haar_unitary(total, rng)
    v = u[:, :dim_in]
    ops = tuple(v.reshape(dim_out, kraus_rank, dim_in)[:, e, :] for e in range(kraus_rank))
    return KrausChannel(kraus_ops=ops, dim_in=dim_in, dim_out=dim_out)
