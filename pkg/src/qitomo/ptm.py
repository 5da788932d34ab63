"""Pauli transfer matrix (PTM) representations of states, effects, gates and
quantum instruments.

Everything lives in the normalized Pauli basis ``B_k = P_k / sqrt(d)`` where
``P_k`` runs over tensor products of {I, X, Y, Z}.  In this basis

* a state ``rho`` is the real vector ``r_k = Tr(B_k rho)``,
* an effect ``E`` is the real dual vector ``e_k = Tr(B_k E)`` and the outcome
  probability is the plain dot product ``e @ r``,
* a linear map ``G`` is the real matrix ``G_kl = Tr(B_k G[B_l])``.

Arrays are used directly for states, effects and process matrices; only the
quantum instrument gets its own container because it carries an ordered set
of branches.
"""
from __future__ import annotations

import functools
import itertools
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.linalg import expm

from .errors import ValidationError

TP_TOL = 1e-8
HERMITIAN_TOL = 1e-8
CP_TOL = 1e-7
P_FLOOR = 1e-12

_PAULI_1Q = np.array(
    [
        [[1, 0], [0, 1]],
        [[0, 1], [1, 0]],
        [[0, -1j], [1j, 0]],
        [[1, 0], [0, -1]],
    ],
    dtype=complex,
)
_AXES = {"x": 1, "y": 2, "z": 3}


@functools.lru_cache(maxsize=None)
def _basis_cached(d: int) -> np.ndarray:
    n = int(round(np.log2(d)))
    if 2**n != d or n < 1:
        raise ValidationError(f"dimension must be a power of two, got {d}")
    mats = []
    for idx in itertools.product(range(4), repeat=n):
        m = np.ones((1, 1), dtype=complex)
        for k in idx:
            m = np.kron(m, _PAULI_1Q[k])
        mats.append(m / np.sqrt(d))
    out = np.array(mats)
    out.setflags(write=False)
    return out


def pauli_basis(d: int = 2) -> np.ndarray:
    """Normalized Pauli basis as an array of shape ``(d*d, d, d)``."""
    return _basis_cached(int(d))


def dim_from_vec(v) -> int:
    n = np.asarray(v).shape[-1]
    d = int(round(np.sqrt(n)))
    if d * d != n:
        raise ValidationError(f"length {n} is not a square")
    return d


# --- states and effects -----------------------------------------------------

def state_vec(rho) -> np.ndarray:
    """Density matrix -> normalized-Pauli vector."""
    rho = np.asarray(rho, dtype=complex)
    B = pauli_basis(rho.shape[0])
    return np.real(np.einsum("kab,ba->k", B, rho))


def density_matrix(vec) -> np.ndarray:
    """Normalized-Pauli vector -> operator (works for effects too)."""
    vec = np.asarray(vec, dtype=float)
    B = pauli_basis(dim_from_vec(vec))
    return np.einsum("k,kab->ab", vec, B)


effect_vec = state_vec
effect_matrix = density_matrix


def basis_state(i: int, d: int = 2) -> np.ndarray:
    """Vector of the computational basis projector ``|i><i|``."""
    p = np.zeros((d, d), dtype=complex)
    p[i, i] = 1.0
    return state_vec(p)


def identity_effect(d: int = 2) -> np.ndarray:
    return state_vec(np.eye(d))


def is_physical_state(vec, tol: float = CP_TOL) -> bool:
    rho = density_matrix(vec)
    d = rho.shape[0]
    if abs(vec[0] - 1 / np.sqrt(d)) > tol:
        return False
    return bool(np.linalg.eigvalsh(rho).min() >= -tol)


def bloch_vector(vec) -> np.ndarray:
    """Bloch vector (x, y, z) of a qubit state vector, normalized by its trace."""
    vec = np.asarray(vec, dtype=float)
    if vec.shape != (4,):
        raise ValidationError("Bloch vectors are defined for qubits only")
    return vec[1:] / vec[0]


def _psd_sqrt(a):
    w, v = np.linalg.eigh(a)
    w = np.clip(w, 0.0, None)
    return (v * np.sqrt(w)) @ v.conj().T


def state_fidelity(rho, sigma, tol: float = CP_TOL) -> float:
    """Uhlmann fidelity ``(Tr sqrt(sqrt(rho) sigma sqrt(rho)))**2``.

    Inputs are normalized-Pauli vectors of physical states (eigenvalues below
    ``-tol`` are rejected).  Both are renormalized to unit trace.
    """
    a = density_matrix(rho)
    b = density_matrix(sigma)
    for name, m in (("rho", a), ("sigma", b)):
        if np.linalg.eigvalsh(m).min() < -tol:
            raise ValidationError(f"{name} is not positive semidefinite")
    a = a / np.trace(a).real
    b = b / np.trace(b).real
    sa = _psd_sqrt(a)
    inner = _psd_sqrt(sa @ b @ sa)
    f = np.trace(inner).real ** 2
    return float(min(max(f, 0.0), 1.0))


# --- process matrices -------------------------------------------------------

def ptm_from_superop(fn, d: int = 2) -> np.ndarray:
    """PTM of a linear map given as a Python callable on d x d matrices."""
    B = pauli_basis(d)
    out = np.empty((d * d, d * d))
    for l, bl in enumerate(B):
        img = fn(bl)
        out[:, l] = np.real(np.einsum("kab,ba->k", B, img))
    return out


def ptm_from_kraus(kraus) -> np.ndarray:
    kraus = np.asarray(kraus, dtype=complex)
    if kraus.ndim == 2:
        kraus = kraus[None]
    d = kraus.shape[-1]
    B = pauli_basis(d)
    # G_kl = sum_a Tr(B_k A_a B_l A_a^dag)
    t = np.einsum("aij,ljm,anm->alin", kraus, B, kraus.conj())
    return np.real(np.einsum("kni,alin->kl", B, t))


def ptm_from_unitary(U, tol: float = 1e-8) -> np.ndarray:
    """PTM of the unitary channel ``rho -> U rho U^dag``."""
    U = np.asarray(U, dtype=complex)
    if U.ndim != 2 or U.shape[0] != U.shape[1]:
        raise ValidationError("unitary must be a square matrix")
    dev = np.abs(U.conj().T @ U - np.eye(U.shape[0])).max()
    if dev > tol:
        raise ValidationError(f"matrix is not unitary (deviation {dev:.3g})")
    return ptm_from_kraus(U[None])


def apply(G, rho) -> np.ndarray:
    G = np.asarray(G, dtype=float)
    rho = np.asarray(rho, dtype=float)
    if G.ndim != 2 or G.shape[1] != rho.shape[0]:
        raise ValidationError(
            f"dimension mismatch: process {G.shape} vs state {rho.shape}"
        )
    return G @ rho


def choi_of(G) -> np.ndarray:
    """Choi matrix ``J = sum_ij G(|i><j|) (x) |i><j|`` (output factor first)."""
    G = np.asarray(G, dtype=float)
    B = pauli_basis(dim_from_vec(G[0]))
    d = B.shape[1]
    J = np.einsum("kl,kab,lcd->acbd", G, B, B.conj())
    return J.reshape(d * d, d * d)


def ptm_of(J) -> np.ndarray:
    """Inverse of :func:`choi_of`."""
    J = np.asarray(J, dtype=complex)
    d = int(round(np.sqrt(J.shape[0])))
    B = pauli_basis(d)
    J4 = J.reshape(d, d, d, d)
    return np.real(np.einsum("kab,lcd,acbd->kl", B.conj(), B, J4))


def is_tp(G, tol: float = TP_TOL) -> bool:
    G = np.asarray(G, dtype=float)
    e0 = np.zeros(G.shape[1])
    e0[0] = 1.0
    return bool(np.abs(G[0] - e0).max() <= tol)


def choi_min_eigenvalue(G) -> float:
    J = choi_of(G)
    J = 0.5 * (J + J.conj().T)
    return float(np.linalg.eigvalsh(J).min())


def is_cp(G, tol: float = CP_TOL) -> bool:
    return choi_min_eigenvalue(G) >= -tol


def depolarizing(p: float, d: int = 2) -> np.ndarray:
    """``diag(1, 1-p, ..., 1-p)``; CP for ``0 <= p <= d^2/(d^2-1)``."""
    if not 0.0 <= p <= d * d / (d * d - 1.0):
        raise ValidationError(f"depolarizing strength {p} outside CP range")
    out = np.eye(d * d) * (1.0 - p)
    out[0, 0] = 1.0
    return out


def rotation(axis: str, angle: float) -> np.ndarray:
    """Qubit PTM of ``exp(-i angle sigma_axis / 2)``."""
    if axis not in _AXES:
        raise ValidationError(f"unknown axis {axis!r}")
    sigma = _PAULI_1Q[_AXES[axis]]
    U = expm(-0.5j * angle * sigma)
    return ptm_from_unitary(U)


def project_cptp(G) -> np.ndarray:
    """Closest-ish CPTP map: clip the Choi spectrum, then restore TP.

    Used to seed constrained fits; not an exact metric projection.
    """
    J = choi_of(G)
    J = 0.5 * (J + J.conj().T)
    w, v = np.linalg.eigh(J)
    w = np.clip(w, 0.0, None)
    J = (v * w) @ v.conj().T
    d = int(round(np.sqrt(J.shape[0])))
    T = np.einsum("aiaj->ij", J.reshape(d, d, d, d))
    wt, vt = np.linalg.eigh(0.5 * (T + T.conj().T))
    s = (vt / np.sqrt(np.clip(wt, 1e-14, None))) @ vt.conj().T
    K = np.kron(np.eye(d), s)
    return ptm_of(K @ J @ K.conj().T)


# --- quantum instruments ----------------------------------------------------

@dataclass(frozen=True)
class QuantumInstrument:
    """Ordered branches ``[Q_0, ..., Q_{m-1}]`` whose sum should be TP."""

    branches: tuple

    def __init__(self, branches: Sequence):
        arrs = tuple(np.array(b, dtype=float) for b in branches)
        if not arrs:
            raise ValidationError("an instrument needs at least one branch")
        shape = arrs[0].shape
        if len(shape) != 2 or shape[0] != shape[1]:
            raise ValidationError("instrument branches must be square")
        for a in arrs:
            if a.shape != shape:
                raise ValidationError("instrument branches differ in shape")
            a.setflags(write=False)
        object.__setattr__(self, "branches", arrs)

    @property
    def m(self) -> int:
        return len(self.branches)

    @property
    def total(self) -> np.ndarray:
        return np.sum(self.branches, axis=0)

    def __len__(self):
        return self.m

    def __getitem__(self, i):
        return self.branches[i]

    def __iter__(self):
        return iter(self.branches)

    def is_tp(self, tol: float = TP_TOL) -> bool:
        return is_tp(self.total, tol)

    def is_cp(self, tol: float = CP_TOL) -> bool:
        return all(is_cp(b, tol) for b in self.branches)

    def transform(self, fn) -> "QuantumInstrument":
        return QuantumInstrument([fn(b) for b in self.branches])


def stack(Q: QuantumInstrument) -> np.ndarray:
    """``(m d^2) x d^2`` matrix with branch 0 on top."""
    return np.vstack(Q.branches)


def unstack(S, m: int) -> QuantumInstrument:
    S = np.asarray(S, dtype=float)
    if S.shape[0] % m:
        raise ValidationError("row count is not a multiple of the branch count")
    return QuantumInstrument(np.split(S, m, axis=0))


def instrument_apply(Q: QuantumInstrument, rho, p_floor: float = P_FLOOR):
    """Outcome probabilities and conditional states.

    Returns a list of ``(p_i, rho_i)``; ``rho_i`` is ``None`` when
    ``p_i <= p_floor``.
    """
    rho = np.asarray(rho, dtype=float)
    d = dim_from_vec(rho)
    ident = identity_effect(d)
    out = []
    for branch in Q.branches:
        v = apply(branch, rho)
        p = float(ident @ v)
        out.append((p, v / (np.sqrt(d) * v[0]) if p > p_floor else None))
    return out


def measure_prepare_instrument(d: int = 2) -> QuantumInstrument:
    """Ideal computational-basis measurement ``Q_k[rho] = Tr(P_k rho) P_k``."""
    branches = []
    for k in range(d):
        P = np.zeros((d, d), dtype=complex)
        P[k, k] = 1.0
        branches.append(ptm_from_superop(lambda X, P=P: np.trace(P @ X) * P, d))
    return QuantumInstrument(branches)
