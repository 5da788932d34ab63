"""NumPy implementation of the circuit-evaluation kernels.

Same contract as the compiled ``_ckernels`` module.  Sequences are padded to
a common length with an identity operation and advanced in lock step.
"""
import numpy as np


def _padded(ops, ptr, seq):
    n_seq = len(ptr) - 1
    lens = np.diff(ptr)
    L = int(lens.max()) if n_seq else 0
    D = ops.shape[1]
    ext = np.concatenate([ops, np.eye(D)[None]], axis=0)
    idx = np.full((n_seq, L), ops.shape[0], dtype=np.intp)
    for s in range(n_seq):
        idx[s, L - lens[s]:] = seq[ptr[s]:ptr[s + 1]]
    return ext, idx


def forward(ops, rho, effects, ptr, seq):
    ops = np.asarray(ops, dtype=float)
    ext, idx = _padded(ops, ptr, seq)
    v = np.broadcast_to(np.asarray(rho, dtype=float), (idx.shape[0], rho.shape[0]))
    for t in range(idx.shape[1]):
        v = np.einsum("sab,sb->sa", ext[idx[:, t]], v)
    return v @ np.asarray(effects, dtype=float).T


def backward(ops, rho, effects, ptr, seq, w):
    ops = np.asarray(ops, dtype=float)
    effects = np.asarray(effects, dtype=float)
    w = np.asarray(w, dtype=float)
    ext, idx = _padded(ops, ptr, seq)
    n_seq, L = idx.shape
    vs = [np.broadcast_to(np.asarray(rho, dtype=float), (n_seq, rho.shape[0]))]
    for t in range(L):
        vs.append(np.einsum("sab,sb->sa", ext[idx[:, t]], vs[-1]))
    probs = vs[-1] @ effects.T
    g_eff = w.T @ vs[-1]
    u = w @ effects
    g_ext = np.zeros_like(ext)
    for t in range(L - 1, -1, -1):
        np.add.at(g_ext, idx[:, t], np.einsum("sa,sb->sab", u, vs[t]))
        u = np.einsum("sa,sab->sb", u, ext[idx[:, t]])
    g_rho = u.sum(axis=0)
    return probs, g_ext[:-1], g_rho, g_eff
