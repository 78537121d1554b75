"""CPTP maps as Kraus families, dilations with a conserved charge, and the
named channels used by the application checkers (erasure, measurement,
dephasing), plus the Petz recovery construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import prod

import numpy as np

from .linalg import (
    SUPPORT_CUTOFF,
    TensorFactorization,
    as_matrix,
    dagger,
    hermitian_eig,
    hermitize,
    kron,
    partial_trace,
    psd_sqrt,
    pseudo_inverse_sqrt,
    require_square,
    spectral_spread,
)
from .states import DensityMatrix

TP_ATOL = 1e-9


@dataclass(frozen=True)
class KrausChannel:
    """CPTP map given by Kraus operators of shape (dim_out, dim_in)."""

    kraus_ops: tuple[np.ndarray, ...]
    dim_in: int
    dim_out: int

    def __post_init__(self):
        ops = tuple(np.asarray(k, dtype=np.complex128) for k in self.kraus_ops)
        if not ops:
            raise ValueError("channel needs at least one Kraus operator")
        for k in ops:
            if k.shape != (self.dim_out, self.dim_in):
                raise ValueError(f"Kraus shape {k.shape} != ({self.dim_out}, {self.dim_in})")
        tp = sum(k.conj().T @ k for k in ops)
        gap = np.max(np.abs(tp - np.eye(self.dim_in)))
        if gap > TP_ATOL:
            raise ValueError(f"Kraus family is not trace preserving (defect {gap:.3e})")
        object.__setattr__(self, "kraus_ops", ops)

    @classmethod
    def from_ops(cls, ops) -> "KrausChannel":
        ops = [np.asarray(k, dtype=np.complex128) for k in ops]
        return cls(kraus_ops=tuple(ops), dim_in=ops[0].shape[1], dim_out=ops[0].shape[0])


def apply(ch: KrausChannel, rho):
    """Apply the channel; DensityMatrix in -> DensityMatrix out."""
    m = as_matrix(rho)
    if m.shape[0] != ch.dim_in:
        raise ValueError(f"input dimension {m.shape[0]} != channel dim_in {ch.dim_in}")
    out = sum(k @ m @ k.conj().T for k in ch.kraus_ops)
    if isinstance(rho, DensityMatrix):
        return DensityMatrix(out)
    return out


def dual_apply(ch: KrausChannel, w) -> np.ndarray:
    """Heisenberg-picture dual: Tr[W E(rho)] = Tr[dual(W) rho].  Unital."""
    m = as_matrix(w)
    if m.shape[0] != ch.dim_out:
        raise ValueError(f"observable dimension {m.shape[0]} != channel dim_out {ch.dim_out}")
    return sum(k.conj().T @ m @ k for k in ch.kraus_ops)


def identity_channel(dim: int) -> KrausChannel:
    return KrausChannel.from_ops([np.eye(dim, dtype=np.complex128)])


def unitary_channel(u) -> KrausChannel:
    u = require_square(as_matrix(u), "unitary")
    if np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0]))) > TP_ATOL:
        raise ValueError("matrix is not unitary")
    return KrausChannel.from_ops([u])


def constant_channel(sigma: DensityMatrix, dim_in: int) -> KrausChannel:
    """rho -> sigma for every input."""
    w, v = hermitian_eig(sigma.matrix)
    ops = []
    for r in range(sigma.dim):
        if w[r] <= SUPPORT_CUTOFF:
            continue
        for s in range(dim_in):
            k = np.zeros((sigma.dim, dim_in), dtype=np.complex128)
            k[:, s] = np.sqrt(w[r]) * v[:, r]
            ops.append(k)
    return KrausChannel(kraus_ops=tuple(ops), dim_in=dim_in, dim_out=sigma.dim)


def compose(after: KrausChannel, before: KrausChannel) -> KrausChannel:
    """after o before (apply `before` first)."""
    if before.dim_out != after.dim_in:
        raise ValueError(f"cannot compose: {before.dim_out} -> {after.dim_in}")
    ops = tuple(a @ b for a in after.kraus_ops for b in before.kraus_ops)
    return KrausChannel(kraus_ops=ops, dim_in=before.dim_in, dim_out=after.dim_out)


def tensor_with_identity(ch: KrausChannel, d_ref: int) -> KrausChannel:
    """Extend a channel to act as ch (x) id on system (x) reference."""
    eye = np.eye(d_ref, dtype=np.complex128)
    ops = tuple(np.kron(k, eye) for k in ch.kraus_ops)
    return KrausChannel(kraus_ops=ops, dim_in=ch.dim_in * d_ref, dim_out=ch.dim_out * d_ref)


def dephasing_channel(x, group_tol: float = 1e-9) -> KrausChannel:
    """Kill coherences across distinct eigenvalues of x (degenerate values grouped)."""
    w, v = hermitian_eig(x)
    ops = []
    start = 0
    for i in range(1, len(w) + 1):
        if i == len(w) or w[i] - w[start] > group_tol:
            cols = v[:, start:i]
            ops.append(cols @ cols.conj().T)
            start = i
    return KrausChannel.from_ops(ops)


@dataclass(frozen=True)
class MeasurementChannel:
    """POVM whose outcomes land on a classical pointer basis."""

    povm: tuple[np.ndarray, ...]

    def __post_init__(self):
        ops = tuple(hermitize(e) for e in self.povm)
        total = sum(ops)
        if np.max(np.abs(total - np.eye(ops[0].shape[0]))) > TP_ATOL:
            raise ValueError("POVM elements do not sum to the identity")
        for e in ops:
            if np.linalg.eigvalsh(e)[0] < -TP_ATOL:
                raise ValueError("POVM element is not PSD")
        object.__setattr__(self, "povm", ops)

    @property
    def pointer_dim(self) -> int:
        return len(self.povm)

    @property
    def dim_in(self) -> int:
        return self.povm[0].shape[0]


def measurement_channel(m: MeasurementChannel) -> KrausChannel:
    """rho -> sum_k Tr[E_k rho] |k><k| on the pointer space."""
    ops = []
    for k, e in enumerate(m.povm):
        w, v = hermitian_eig(e)
        for r in range(len(w)):
            if w[r] <= SUPPORT_CUTOFF:
                continue
            op = np.zeros((m.pointer_dim, m.dim_in), dtype=np.complex128)
            op[k, :] = np.sqrt(w[r]) * v[:, r].conj()
            ops.append(op)
    return KrausChannel(kraus_ops=tuple(ops), dim_in=m.dim_in, dim_out=m.pointer_dim)


def erasure_noise_channel(factors: TensorFactorization, replacement_states) -> KrausChannel:
    """Erase one subsystem uniformly at random, recording the location.

    Output lives on M (x) P with M of dimension N: the erased slot i is reset
    to replacement_states[i] and the pointer is set to |i>.
    """
    dims = factors.factor_dims
    n = len(dims)
    if len(replacement_states) != n:
        raise ValueError(f"need {n} replacement states, got {len(replacement_states)}")
    d_p = prod(dims)
    ops = []
    for i, tau in enumerate(replacement_states):
        t = as_matrix(tau)
        if t.shape[0] != dims[i]:
            raise ValueError(f"replacement state {i} has dimension {t.shape[0]} != {dims[i]}")
        wt, vt = hermitian_eig(t)
        pointer = np.zeros(n, dtype=np.complex128)
        pointer[i] = 1.0
        left = np.eye(prod(dims[:i]), dtype=np.complex128)
        right = np.eye(prod(dims[i + 1:]), dtype=np.complex128)
        for r in range(dims[i]):
            if wt[r] <= SUPPORT_CUTOFF:
                continue
            for j in range(dims[i]):
                slot = np.sqrt(wt[r] / n) * np.outer(vt[:, r], np.eye(dims[i])[j].conj())
                body = kron(left, slot, right)
                ops.append(np.kron(pointer.reshape(-1, 1), body))
    return KrausChannel(kraus_ops=tuple(ops), dim_in=d_p, dim_out=n * d_p)


@dataclass(frozen=True)
class Implementation:
    """Dilation (U, rho_env) of a channel together with the local charges.

    dims = (d_sys, d_env, d_sys_out, d_env_out) with d_sys*d_env equal to
    d_sys_out*d_env_out; the induced channel traces out the output environment.
    The conservation defect Z is computed once and stored.
    """

    u: np.ndarray
    env_state: DensityMatrix
    x_sys: np.ndarray
    x_env: np.ndarray
    x_sys_out: np.ndarray
    x_env_out: np.ndarray
    dims: tuple[int, int, int, int]
    defect: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        d_sys, d_env, d_sys_out, d_env_out = self.dims
        if d_sys * d_env != d_sys_out * d_env_out:
            raise ValueError(f"incompatible dims {self.dims}")
        u = require_square(as_matrix(self.u), "dilation unitary")
        if u.shape[0] != d_sys * d_env:
            raise ValueError(f"unitary dimension {u.shape[0]} != {d_sys * d_env}")
        if np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0]))) > TP_ATOL:
            raise ValueError("dilation matrix is not unitary")
        if self.env_state.dim != d_env:
            raise ValueError("environment state dimension mismatch")
        for name, op, d in (
            ("x_sys", self.x_sys, d_sys),
            ("x_env", self.x_env, d_env),
            ("x_sys_out", self.x_sys_out, d_sys_out),
            ("x_env_out", self.x_env_out, d_env_out),
        ):
            m = hermitize(op)
            if m.shape[0] != d:
                raise ValueError(f"{name} has dimension {m.shape[0]}, expected {d}")
            object.__setattr__(self, name, m)
        object.__setattr__(self, "u", u)
        total_in = kron(self.x_sys, np.eye(d_env)) + kron(np.eye(d_sys), self.x_env)
        total_out = kron(self.x_sys_out, np.eye(d_env_out)) + kron(np.eye(d_sys_out), self.x_env_out)
        z = u.conj().T @ total_out @ u - total_in
        object.__setattr__(self, "defect", hermitize(z, atol=1e-9))

    @property
    def d_sys(self) -> int:
        return self.dims[0]

    @property
    def d_sys_out(self) -> int:
        return self.dims[2]

    def is_conserving(self, atol: float = TP_ATOL) -> bool:
        return bool(np.max(np.abs(self.defect)) <= atol)


def conservation_defect(impl: Implementation) -> tuple[np.ndarray, float]:
    """The violation operator Z and its spectral spread."""
    return impl.defect, spectral_spread(impl.defect)


def channel_of(impl: Implementation) -> KrausChannel:
    """Kraus form of rho -> Tr_env_out[U (rho x rho_env) U^dag]."""
    d_sys, d_env, d_sys_out, d_env_out = impl.dims
    w, v = hermitian_eig(impl.env_state.matrix)
    # U maps sys (x) env; reshape its action to expose the output split.
    u4 = impl.u.reshape(d_sys_out, d_env_out, d_sys, d_env)
    ops = []
    for r in range(d_env):
        if w[r] <= 1e-14:
            continue
        amp = np.sqrt(w[r])
        block = np.tensordot(u4, v[:, r], axes=([3], [0]))  # (d_sys_out, d_env_out, d_sys)
        for e in range(d_env_out):
            ops.append(amp * block[:, e, :])
    return KrausChannel(kraus_ops=tuple(ops), dim_in=d_sys, dim_out=d_sys_out)


def choi_matrix(ch: KrausChannel) -> np.ndarray:
    """Unnormalized Choi operator sum_ij |i><j| (x) E(|i><j|)."""
    c = np.zeros((ch.dim_in * ch.dim_out,) * 2, dtype=np.complex128)
    for k in ch.kraus_ops:
        vec = k.T.reshape(-1)
        c += np.outer(vec, vec.conj())
    return c


def is_covariant(ch: KrausChannel, x_in, x_out, n_angles: int = 8, tol: float = 1e-8):
    """Grid check of E(e^{iXt} . e^{-iXt}) = e^{iX't} E(.) e^{-iX't}.

    Returns (verdict, max Frobenius deviation).  The angle range is stretched
    when the spectra have gaps below 1, so slow relative phases still wind.
    """
    if n_angles < 8:
        raise ValueError("n_angles must be >= 8")
    w_in, v_in = hermitian_eig(x_in)
    w_out, v_out = hermitian_eig(x_out)
    gaps = [g for w in (w_in, w_out) for g in np.diff(np.unique(np.round(w, 9))) if g > 1e-9]
    reach = 2 * np.pi * max(1.0, 1.0 / min(gaps)) if gaps else 2 * np.pi
    basis = [np.zeros((ch.dim_in, ch.dim_in), dtype=np.complex128) for _ in range(ch.dim_in**2)]
    for i in range(ch.dim_in):
        for j in range(ch.dim_in):
            basis[i * ch.dim_in + j][i, j] = 1.0
    images = [apply(ch, b) for b in basis]
    worst = 0.0
    for k in range(n_angles):
        t = (k + 0.5) * reach / n_angles
        g_in = (v_in * np.exp(1j * w_in * t)) @ v_in.conj().T
        g_out = (v_out * np.exp(1j * w_out * t)) @ v_out.conj().T
        for b, img in zip(basis, images):
            lhs = apply(ch, g_in @ b @ g_in.conj().T)
            rhs = g_out @ img @ g_out.conj().T
            worst = max(worst, float(np.linalg.norm(lhs - rhs)))
    return worst <= tol, worst


def petz_recovery_channel(forward: KrausChannel, sigma: DensityMatrix,
                          cutoff: float = SUPPORT_CUTOFF,
                          completion: str = "projection") -> KrausChannel:
    """Petz recovery of `forward` relative to the reference state `sigma`.

    Kraus form of sqrt(sigma) E^dag( N(sigma)^{-1/2} . N(sigma)^{-1/2} ) sqrt(sigma).
    The map is trace preserving only on the support of N(sigma); the missing
    branch is completed by a fixed deterministic rule:

    - 'projection': route to the normalized projector onto sigma's support
      (rank(sigma) * dim(kernel) extra Kraus operators);
    - 'grouped': map the kernel isometrically onto the output basis in groups
      (ceil(dim(kernel) / dim_out) extra operators; used when the kernel is
      large, e.g. for wide scrambling channels).

    Both completions agree on every state supported inside supp(N(sigma)).
    """
    if sigma.dim != forward.dim_in:
        raise ValueError("reference state must live on the channel input")
    if completion not in ("projection", "grouped"):
        raise ValueError(f"unknown completion {completion!r}")
    n_sigma = apply(forward, sigma.matrix)
    inv_root = pseudo_inverse_sqrt(n_sigma, cutoff=cutoff)
    root_sigma = psd_sqrt(sigma.matrix)
    ops = [root_sigma @ k.conj().T @ inv_root for k in forward.kraus_ops]
    w, v = hermitian_eig(n_sigma)
    dead = v[:, w <= cutoff]
    d_out = forward.dim_in
    if dead.shape[1] and completion == "projection":
        ws, vs = hermitian_eig(sigma.matrix)
        support = vs[:, ws > cutoff]
        amp = 1.0 / np.sqrt(support.shape[1])
        for i in range(dead.shape[1]):
            for j in range(support.shape[1]):
                ops.append(amp * np.outer(support[:, j], dead[:, i].conj()))
    elif dead.shape[1]:
        eye = np.eye(d_out, dtype=np.complex128)
        for start in range(0, dead.shape[1], d_out):
            cols = dead[:, start:start + d_out]
            ops.append(eye[:, : cols.shape[1]] @ cols.conj().T)
    return KrausChannel(kraus_ops=tuple(ops), dim_in=forward.dim_out, dim_out=forward.dim_in)
