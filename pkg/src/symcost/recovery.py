"""Certified upper bounds on the irreversibility of a channel.

Every optimizer here returns a value realized by an explicit recovery channel,
so results are upper bounds by construction; the optimization only tightens
them.  Seeds (Petz maps, adjoint unitary, constant channels) guarantee sane
output even with the minimum budget.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Sequence

import numpy as np
from scipy.optimize import minimize

from .channels import (
    KrausChannel,
    apply,
    choi_matrix,
    constant_channel,
    identity_channel,
    petz_recovery_channel,
    tensor_with_identity,
    unitary_channel,
)
from .linalg import as_matrix, hermitian_eig, hermitize, partial_trace, psd_sqrt
from .states import (
    DensityMatrix,
    TestEnsemble,
    maximally_entangled,
    purified_distance,
    trace_distance,
)
from .rand import generator, haar_pure_vector

MIN_BUDGET = (4, 200)
_NM_PARAM_CAP = 64     # fall back to a leaner environment above this
_NM_HARD_CAP = 240     # skip Nelder-Mead entirely above this


class RecoveryError(NamedTuple):
    delta: float
    delta_t: float
    per_state: tuple[float, ...]


@dataclass(frozen=True)
class OptimizedRecovery:
    delta_upper: float
    recovery: KrausChannel
    delta_t: float
    per_state: tuple[float, ...]


@dataclass(frozen=True)
class EntanglementErrors:
    eps_bar: float
    eps_psi: float
    recovery_bar: KrausChannel
    recovery_psi: KrausChannel


def helstrom_measurement(rho0, rho1, p0: float):
    """Optimal binary discrimination: projector onto (p0 rho0 - p1 rho1)_+.

    Returns (projector, minimum error probability).
    """
    if not 0.0 <= p0 <= 1.0:
        raise ValueError(f"p0 must be a probability, got {p0}")
    m = hermitize(p0 * as_matrix(rho0) - (1.0 - p0) * as_matrix(rho1), atol=1e-9)
    w, v = hermitian_eig(m)
    cols = v[:, w > 1e-12]
    projector = cols @ cols.conj().T
    error = (1.0 - float(np.sum(np.abs(w)))) / 2.0
    return projector, max(0.0, error)


def _apply_ops(ops: Sequence[np.ndarray], rho: np.ndarray) -> np.ndarray:
    return sum(k @ rho @ k.conj().T for k in ops)


class _StateFidelity:
    """Fidelity against a fixed state, with a rank-one fast path."""

    def __init__(self, rho: np.ndarray):
        w, v = hermitian_eig(rho)
        if np.sum(w > 1e-12) == 1:
            self.vec = v[:, -1]
            self.root = None
        else:
            self.vec = None
            self.root = psd_sqrt(rho)

    def fidelity(self, sigma: np.ndarray) -> float:
        if self.vec is not None:
            val = float(np.real(self.vec.conj() @ sigma @ self.vec))
            return math.sqrt(min(1.0, max(0.0, val)))
        mid = self.root @ sigma @ self.root
        w = np.linalg.eigvalsh((mid + mid.conj().T) / 2)
        return float(min(1.0, np.sum(np.sqrt(np.clip(w, 0.0, None)))))

    def purified_distance(self, sigma: np.ndarray) -> float:
        f = self.fidelity(sigma)
        return math.sqrt(max(0.0, 1.0 - f * f))


def recovery_error(ensemble: TestEnsemble, forward: KrausChannel,
                   recovery: KrausChannel) -> RecoveryError:
    """Root-mean-square purified distance (and averaged trace distance) of
    recovering the test ensemble through recovery o forward."""
    if forward.dim_in != ensemble.dim or recovery.dim_in != forward.dim_out:
        raise ValueError("ensemble/forward/recovery dimensions do not compose")
    if recovery.dim_out != ensemble.dim:
        raise ValueError("recovery must map back to the ensemble space")
    per = []
    d_t = 0.0
    sq = 0.0
    for p, state in zip(ensemble.weights, ensemble.states):
        out = apply(recovery, apply(forward, state.matrix))
        d = purified_distance(state.matrix, out)
        per.append(d)
        sq += p * d * d
        d_t += p * trace_distance(state.matrix, out)
    return RecoveryError(math.sqrt(max(0.0, sq)), d_t, tuple(per))


# ---------------------------------------------------------------------------
# Stinespring parameterization: isometry columns built from Givens rotations.
# ---------------------------------------------------------------------------

def _givens_param_count(d_full: int, d_cols: int) -> int:
    return sum(2 * (d_full - 1 - c) + 1 for c in range(d_cols))


def _isometry_from_params(d_full: int, d_cols: int, params: np.ndarray) -> np.ndarray:
    v = np.eye(d_full, d_cols, dtype=np.complex128)
    k = 0
    for c in range(d_cols):
        for r in range(d_full - 2, c - 1, -1):
            th, ph = params[k], params[k + 1]
            k += 2
            ct, st = math.cos(th), math.sin(th)
            e = complex(math.cos(ph), math.sin(ph))
            row_r = v[r, :].copy()
            row_s = v[r + 1, :]
            v[r, :] = ct * row_r - e * st * row_s
            v[r + 1, :] = np.conj(e) * st * row_r + ct * row_s
        v[:, c] *= complex(math.cos(params[k]), math.sin(params[k]))
        k += 1
    return v


def _ops_from_params(d_in: int, d_out: int, env: int, params: np.ndarray) -> list[np.ndarray]:
    v = _isometry_from_params(d_out * env, d_in, params)
    blocks = v.reshape(d_out, env, d_in)
    return [blocks[:, e, :] for e in range(env)]


def _pick_env(d_in: int, d_out: int) -> int:
    env = d_out * d_out
    if _givens_param_count(d_out * env, d_in) > _NM_PARAM_CAP:
        env = d_out
    return max(env, math.ceil(d_in / d_out))


def _truncation_channel(dim_in: int, dim_out: int) -> KrausChannel:
    """Identity-shaped recovery: isometric embed, or truncate with overflow to |0>."""
    if dim_in == dim_out:
        return identity_channel(dim_in)
    if dim_in < dim_out:
        k = np.zeros((dim_out, dim_in), dtype=np.complex128)
        k[:dim_in, :] = np.eye(dim_in)
        return KrausChannel.from_ops([k])
    ops = [np.zeros((dim_out, dim_in), dtype=np.complex128)]
    ops[0][:, :dim_out] = np.eye(dim_out)
    for j in range(dim_out, dim_in):
        k = np.zeros((dim_out, dim_in), dtype=np.complex128)
        k[0, j] = 1.0
        ops.append(k)
    return KrausChannel(kraus_ops=tuple(ops), dim_in=dim_in, dim_out=dim_out)


def _near_unitary_adjoint(forward: KrausChannel, tol: float = 1e-6) -> KrausChannel | None:
    """If the forward Choi matrix is rank one (unitary channel), return
    conjugation by the adjoint."""
    if forward.dim_in != forward.dim_out:
        return None
    w, v = hermitian_eig(choi_matrix(forward))
    if len(w) > 1 and w[-2] > tol * max(1.0, w[-1]):
        return None
    k = math.sqrt(max(w[-1], 0.0)) * v[:, -1].reshape(forward.dim_in, forward.dim_out).T
    if np.max(np.abs(k.conj().T @ k - np.eye(forward.dim_in))) > 1e-6:
        return None
    u, _, vh = np.linalg.svd(k)
    return unitary_channel((u @ vh).conj().T)


def _optimize_ops(
    d_in: int,
    d_out: int,
    objective_ops: Callable[[Sequence[np.ndarray]], float],
    budget: tuple[int, int],
    rng: np.random.Generator,
    seed_channels: Sequence[KrausChannel],
) -> tuple[float, KrausChannel]:
    """Derivative-free minimization over recovery channels.

    The returned value is objective(returned channel) and never exceeds the
    best seed, because the seeds participate in the final minimum.
    """
    best_val = math.inf
    best_ch = None
    for ch in seed_channels:
        val = objective_ops(ch.kraus_ops)
        if val < best_val:
            best_val, best_ch = val, ch
    if best_ch is None:
        raise ValueError("no seed channels supplied")
    if best_val < 1e-9:
        return best_val, best_ch

    restarts, iterations = budget
    env = _pick_env(d_in, d_out)
    n_params = _givens_param_count(d_out * env, d_in)
    if n_params > _NM_HARD_CAP:
        return best_val, best_ch

    def cost(params: np.ndarray) -> float:
        return objective_ops(_ops_from_params(d_in, d_out, env, params))

    for _ in range(restarts):
        x0 = rng.normal(scale=0.6, size=n_params)
        res = minimize(
            cost,
            x0,
            method="Nelder-Mead",
            options={"maxiter": iterations, "xatol": 1e-6, "fatol": 1e-10},
        )
        if res.fun < best_val:
            best_val = float(res.fun)
            best_ch = KrausChannel(
                kraus_ops=tuple(_ops_from_params(d_in, d_out, env, res.x)),
                dim_in=d_in,
                dim_out=d_out,
            )
            if best_val < 1e-9:
                break
    return best_val, best_ch


def _standard_seeds(ensemble: TestEnsemble, forward: KrausChannel,
                    extra_seeds: Sequence[KrausChannel]) -> list[KrausChannel]:
    seeds: list[KrausChannel] = []
    avg = DensityMatrix(ensemble.average_state())
    seeds.append(petz_recovery_channel(forward, avg))
    for state in ensemble.states:
        seeds.append(petz_recovery_channel(forward, state))
    adj = _near_unitary_adjoint(forward)
    if adj is not None:
        seeds.append(adj)
    seeds.append(_truncation_channel(forward.dim_out, forward.dim_in))
    seeds.append(constant_channel(avg, forward.dim_out))
    for state in ensemble.states:
        seeds.append(constant_channel(state, forward.dim_out))
    seeds.extend(extra_seeds)
    return seeds


def optimize_recovery(
    ensemble: TestEnsemble,
    forward: KrausChannel,
    budget: tuple[int, int] = MIN_BUDGET,
    seed=0,
    extra_seeds: Sequence[KrausChannel] = (),
) -> OptimizedRecovery:
    """Certified upper bound on the ensemble irreversibility of `forward`.

    The bound is the error of an explicit recovery channel; Petz maps
    (ensemble average and each test state as reference), the adjoint unitary
    for near-unitary forwards, and the best constant channel are always
    candidate recoveries, so the result never exceeds the best of those.
    """
    if budget[0] < MIN_BUDGET[0] or budget[1] < MIN_BUDGET[1]:
        raise ValueError(f"budget {budget} below minimum {MIN_BUDGET}")
    rng = generator(seed)
    seeds = _standard_seeds(ensemble, forward, extra_seeds)

    images = [apply(forward, s.matrix) for s in ensemble.states]
    targets = [_StateFidelity(s.matrix) for s in ensemble.states]
    weights = ensemble.weights

    def objective_ops(ops: Sequence[np.ndarray]) -> float:
        sq = 0.0
        for p, img, tgt in zip(weights, images, targets):
            d = tgt.purified_distance(_apply_ops(ops, img))
            sq += p * d * d
        return math.sqrt(max(0.0, sq))

    _, best = _optimize_ops(forward.dim_out, forward.dim_in, objective_ops, budget, rng, seeds)
    err = recovery_error(ensemble, forward, best)
    return OptimizedRecovery(err.delta, best, err.delta_t, err.per_state)


# ---------------------------------------------------------------------------
# Entanglement-fidelity errors.
# ---------------------------------------------------------------------------

def _entanglement_seeds(forward: KrausChannel, marginal: DensityMatrix,
                        extra_seeds: Sequence[KrausChannel]) -> list[KrausChannel]:
    seeds = [petz_recovery_channel(forward, marginal),
             _truncation_channel(forward.dim_out, forward.dim_in),
             constant_channel(marginal, forward.dim_out)]
    adj = _near_unitary_adjoint(forward)
    if adj is not None:
        seeds.append(adj)
    seeds.extend(extra_seeds)
    return seeds


def _pure_reference_objective(forward: KrausChannel, ref_vec: np.ndarray, d_ref: int):
    """Objective factory for D_F((R x id)(E x id)(psi), psi) with pure psi.

    With a pure reference, the fidelity is a quadratic form: sandwiching the
    propagated image with (K^dag x id)|psi>.
    """
    d_a = forward.dim_in
    forward_ext = tensor_with_identity(forward, d_ref)
    image = apply(forward_ext, np.outer(ref_vec, ref_vec.conj()))
    psi_mat = ref_vec.reshape(d_a, d_ref)

    def objective_ops(ops: Sequence[np.ndarray]) -> float:
        val = 0.0
        for k in ops:
            w = (k.conj().T @ psi_mat).reshape(-1)
            val += float(np.real(w.conj() @ image @ w))
        f = math.sqrt(min(1.0, max(0.0, val)))
        return math.sqrt(max(0.0, 1.0 - f * f))

    return objective_ops


def entanglement_fidelity_errors(
    forward: KrausChannel,
    budget: tuple[int, int] = MIN_BUDGET,
    seed=0,
    psi: DensityMatrix | None = None,
    extra_seeds: Sequence[KrausChannel] = (),
) -> EntanglementErrors:
    """Upper bounds on the entanglement-fidelity recovery errors.

    eps_bar uses the maximally entangled input on system (x) reference;
    eps_psi uses the supplied pure state (defaults to the same state).
    Both values are realized by explicit recovery channels.
    """
    if budget[0] < MIN_BUDGET[0] or budget[1] < MIN_BUDGET[1]:
        raise ValueError(f"budget {budget} below minimum {MIN_BUDGET}")
    d_a = forward.dim_in
    rng = generator(seed)

    def solve(ref: DensityMatrix) -> tuple[float, KrausChannel]:
        w, v = hermitian_eig(ref.matrix)
        if w[-1] < 1.0 - 1e-9:
            raise ValueError("reference state on system (x) reference must be pure")
        ref_vec = v[:, -1]
        marginal = DensityMatrix(partial_trace(ref.matrix, (d_a, d_a), keep=[0]))
        seeds = _entanglement_seeds(forward, marginal, extra_seeds)
        objective_ops = _pure_reference_objective(forward, ref_vec, d_a)
        return _optimize_ops(forward.dim_out, d_a, objective_ops, budget, rng, seeds)

    bell = maximally_entangled(d_a)
    eps_bar, rec_bar = solve(bell)
    if psi is None:
        return EntanglementErrors(eps_bar, eps_bar, rec_bar, rec_bar)
    if psi.dim != d_a * d_a:
        raise ValueError("psi must live on system (x) reference of equal dimensions")
    eps_psi, rec_psi = solve(psi)
    return EntanglementErrors(eps_bar, eps_psi, rec_bar, rec_psi)


def worst_case_error_surrogate(
    forward: KrausChannel,
    budget: tuple[int, int] = MIN_BUDGET,
    seed=0,
    n_probes: int = 32,
    extra_seeds: Sequence[KrausChannel] = (),
) -> tuple[float, KrausChannel]:
    """Probe-set surrogate for the worst-case entanglement error.

    Minimizes, over recovery channels, the maximum purified distance across a
    fixed set of seeded Haar pure inputs on system (x) reference.  This is a
    surrogate: the probe max can sit below the true worst case.
    """
    d_a = forward.dim_in
    rng = generator(seed)
    probe_rng = generator([0x5EED, n_probes, d_a])
    probe_objectives = []
    avg_marginal = np.zeros((d_a, d_a), dtype=np.complex128)
    for _ in range(n_probes):
        vec = haar_pure_vector(d_a * d_a, probe_rng)
        probe_objectives.append(_pure_reference_objective(forward, vec, d_a))
        avg_marginal += partial_trace(np.outer(vec, vec.conj()), (d_a, d_a), keep=[0])
    marginal = DensityMatrix(avg_marginal / n_probes)
    seeds = _entanglement_seeds(forward, marginal, extra_seeds)

    def objective_ops(ops: Sequence[np.ndarray]) -> float:
        return max(obj(ops) for obj in probe_objectives)

    return _optimize_ops(forward.dim_out, d_a, objective_ops, budget, rng, seeds)
