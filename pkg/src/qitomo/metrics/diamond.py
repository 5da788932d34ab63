"""Half diamond distance between processes or instruments.

The difference map is only required to be Hermiticity preserving (linear
inversion estimates need not be TP), so the general SDP is used:

    ||Phi||_diamond = min  lambda_max(Tr_out(Z0 + Z1))
                      s.t. Z0 - Z1 = J(Phi),  Z0, Z1 >= 0.

An instrument is compared as the map X -> sum_i |i><i| (x) Q_i[X].  Its Choi
matrix is block diagonal in the classical register, and by the phase
symmetry of that register Z0 may be taken block diagonal too.
"""
from __future__ import annotations

import numpy as np
from scipy.optimize import minimize

from .. import ptm
from ..errors import ValidationError
from ..ptm import QuantumInstrument
from .sdp import solve_lmi


def _herm_basis(n: int) -> np.ndarray:
    """Orthonormal basis of n x n Hermitian matrices (real inner product)."""
    out = []
    for a in range(n):
        E = np.zeros((n, n), dtype=complex)
        E[a, a] = 1.0
        out.append(E)
    s = 1.0 / np.sqrt(2.0)
    for a in range(n):
        for b in range(a + 1, n):
            E = np.zeros((n, n), dtype=complex)
            E[a, b] = E[b, a] = s
            out.append(E)
            E = np.zeros((n, n), dtype=complex)
            E[a, b] = -1j * s
            E[b, a] = 1j * s
            out.append(E)
    return np.array(out)


def _ptr_out(J: np.ndarray, d: int) -> np.ndarray:
    """Partial trace over the (first) output factor of a d^2 x d^2 matrix."""
    return np.einsum("aiaj->ij", J.reshape(d, d, d, d))


def _choi_blocks(A, B) -> list[np.ndarray]:
    if isinstance(A, QuantumInstrument) != isinstance(B, QuantumInstrument):
        raise ValidationError("cannot compare an instrument with a process")
    if isinstance(A, QuantumInstrument):
        if A.m != B.m:
            raise ValidationError(f"instrument sizes differ: {A.m} vs {B.m}")
        pairs = list(zip(A.branches, B.branches))
    else:
        pairs = [(np.asarray(A, dtype=float), np.asarray(B, dtype=float))]
    blocks = []
    for a, b in pairs:
        if a.shape != b.shape:
            raise ValidationError(f"shape mismatch {a.shape} vs {b.shape}")
        J = ptm.choi_of(a - b)
        blocks.append(0.5 * (J + J.conj().T))
    return blocks


def diamond_norm_blocks(blocks, tol: float = 1e-9) -> float:
    """Diamond norm of the map whose Choi matrix is ``block_diag(blocks)``."""
    d = int(round(np.sqrt(blocks[0].shape[0])))
    scale = max(np.linalg.norm(J) for J in blocks)
    if scale < 1e-14:
        return 0.0
    Js = [J / scale for J in blocks]
    n = d * d
    H = _herm_basis(n)
    nh = H.shape[0]
    trH = np.array([_ptr_out(h, d) for h in H])
    m = len(Js)
    nvar = 1 + m * nh
    c = np.zeros(nvar)
    c[0] = 1.0
    F0, F = [], []
    # Z0_i >= 0 and Z0_i - J_i >= 0
    for i, J in enumerate(Js):
        for shift in (np.zeros_like(J), -J):
            Fi = np.zeros((nvar, n, n), dtype=complex)
            Fi[1 + i * nh: 1 + (i + 1) * nh] = H
            F0.append(shift)
            F.append(Fi)
    # t I - sum_i Tr_out(2 Z0_i - J_i) >= 0
    Ft = np.zeros((nvar, d, d), dtype=complex)
    Ft[0] = np.eye(d)
    for i in range(m):
        Ft[1 + i * nh: 1 + (i + 1) * nh] = -2.0 * trH
    F0.append(sum(_ptr_out(J, d) for J in Js))
    F.append(Ft)
    res = solve_lmi(c, F0, F, tol=tol)
    # the dual iterate is LMI-feasible, so its objective is an upper bound
    return scale * res.value


def half_diamond_distance(A, B, tol: float = 1e-9) -> float:
    """``0.5 * ||A - B||_diamond`` for two PTMs or two instruments."""
    return 0.5 * diamond_norm_blocks(_choi_blocks(A, B), tol=tol)


# --- brute-force oracle -----------------------------------------------------

def _trace_norms(Js, As):
    """sum_i || (I (x) A) J_i (I (x) A)^dag ||_1 for a batch of A."""
    d = As.shape[-1]
    eye = np.eye(d)
    K = np.einsum("ab,ncd->nacbd", eye, As).reshape(As.shape[0], d * d, d * d)
    total = np.zeros(As.shape[0])
    for J in Js:
        X = K @ J @ np.conj(np.transpose(K, (0, 2, 1)))
        X = 0.5 * (X + np.conj(np.transpose(X, (0, 2, 1))))
        total += np.abs(np.linalg.eigvalsh(X)).sum(axis=1)
    return total


def diamond_oracle(A, B, seed: int = 0, samples: int = 4000, refine: int = 8) -> float:
    """Lower bound on the half diamond distance by direct search.

    The input state is ``(I (x) A)|Omega>`` with ``||A||_F = 1``, so scanning
    complex ``A`` covers every pure input on system plus ancilla.  Dense
    random sampling is followed by local refinement of the best candidates.
    """
    Js = _choi_blocks(A, B)
    d = int(round(np.sqrt(Js[0].shape[0])))
    if max(np.linalg.norm(J) for J in Js) < 1e-14:
        return 0.0
    rng = np.random.default_rng(seed)
    As = rng.normal(size=(samples, d, d)) + 1j * rng.normal(size=(samples, d, d))
    As /= np.linalg.norm(As, axis=(1, 2))[:, None, None]
    vals = _trace_norms(Js, As)

    def neg(x):
        a = (x[: d * d] + 1j * x[d * d:]).reshape(1, d, d)
        a = a / max(np.linalg.norm(a), 1e-300)
        return -_trace_norms(Js, a)[0]

    best = vals.max()
    for k in np.argsort(vals)[::-1][:refine]:
        x0 = np.concatenate([As[k].real.ravel(), As[k].imag.ravel()])
        res = minimize(neg, x0, method="Nelder-Mead",
                       options={"xatol": 1e-10, "fatol": 1e-13, "maxiter": 4000})
        res = minimize(neg, res.x, method="BFGS", options={"gtol": 1e-10})
        best = max(best, -res.fun)
    return 0.5 * float(best)
