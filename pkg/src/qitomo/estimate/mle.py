"""Maximum-likelihood refinement of a gate set.

Constraints by operation class:

* gates: CPTP through a Kraus (factored Choi) parameterization, normalized
  by ``S^-1/2`` with ``S = sum K^dag K`` so trace preservation is exact;
  mode ``"tp"`` instead frees the lower PTM rows and fixes the first.
* state: ``T T^dag / Tr`` with ``T`` lower triangular.
* POVM: ``E_k = S^-1/2 A_k S^-1/2`` with ``A_k = B_k^dag B_k``.
* instruments: the branch sum is TP, branches are not required to be CP.
  All branches are free except the first row of the last one, which is set
  to ``e0`` minus the first rows of the others.

Inside the optimizer the log is continued below ``switch`` by its
second-order Taylor expansion, which keeps the objective smooth and of
moderate size when a TP-only instrument or a poor starting point drives a
probability to zero or below.  Reported log-likelihoods use the plain
clamp at ``floor``.  Negative probabilities (reachable only through the
non-CP instrument branches) are penalized per shot by
``negative_slope |p| + negative_penalty p^2``.  Moving mass off an
empty cell gains at most about one unit of log-likelihood per shot, so a
slope above one makes the penalty exact: the optimum then sits on the
``p >= 0`` boundary instead of slightly beyond it.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .. import kernels, ptm
from ..errors import ValidationError
from ..gateset import GateSet
from ..ptm import QuantumInstrument
from ..simulate import CircuitTable

_FD_STEP = 1e-6
_EIG_FLOOR = 1e-8


@dataclass(frozen=True)
class MleOptions:
    max_iter: int = 3000
    tol: float = 1e-10  # relative change of the objective
    floor: float = 1e-9
    switch: float = 1e-4  # start of the quadratic continuation of log
    gates: str = "cptp"  # or "tp"
    instruments: str = "tp"
    spam: str = "physical"
    negative_penalty: float = 1e4
    negative_slope: float = 4.0

    def __post_init__(self):
        if not self.floor > 0:
            raise ValidationError("probability floor must be positive")
        if self.negative_slope < 0 or self.negative_penalty < 0:
            raise ValidationError("negative-probability penalties must be non-negative")
        if not self.switch >= self.floor:
            raise ValidationError("switch must not be below the floor")
        if self.gates not in ("cptp", "tp"):
            raise ValidationError(f"unknown gate constraint {self.gates!r}")
        if self.instruments != "tp":
            raise ValidationError(f"unknown instrument constraint {self.instruments!r}")
        if self.spam != "physical":
            raise ValidationError(f"unknown SPAM constraint {self.spam!r}")
        if self.max_iter < 1:
            raise ValidationError("max_iter must be at least 1")


@dataclass
class MleInfo:
    loglikelihood: float
    initial_loglikelihood: float
    converged: bool
    iterations: int
    message: str = ""


# --- parameter maps -----------------------------------------------------------

def _inv_sqrt(S):
    w, v = np.linalg.eigh(S)
    w = np.clip(w, 1e-300, None)
    return (v / np.sqrt(w)[..., None, :]) @ np.conj(np.swapaxes(v, -1, -2))


def _cvec(x, shape):
    x = np.asarray(x)
    half = x.shape[-1] // 2
    return (x[..., :half] + 1j * x[..., half:]).reshape(x.shape[:-1] + shape)


def _rvec(z):
    z = z.reshape(-1)
    return np.concatenate([z.real, z.imag])


def _kraus_ptm(x, d, r):
    """Batched map from Kraus parameters (..., 2 r d d) to PTMs."""
    K = _cvec(x, (r, d, d))
    S = np.einsum("...jba,...jbc->...ac", np.conj(K), K)
    K = K @ _inv_sqrt(S)[..., None, :, :]
    B = ptm.pauli_basis(d)
    Kd = np.conj(np.swapaxes(K, -1, -2))
    # images of the basis: out[..., l] = sum_j K_j B_l K_j^dag
    img = (K[..., None, :, :, :] @ B[:, None] @ Kd[..., None, :, :, :]).sum(axis=-3)
    return np.real(np.einsum("kab,...lba->...kl", B, img))


def _tril_complex(x, d):
    il = np.tril_indices(d)
    isl = np.tril_indices(d, -1)
    T = np.zeros(x.shape[:-1] + (d, d), dtype=complex)
    nr = len(il[0])
    T[(...,) + il] = x[..., :nr]
    T[(...,) + isl] += 1j * x[..., nr:]
    return T


def _rho_vec(x, d):
    T = _tril_complex(x, d)
    R = T @ np.conj(np.swapaxes(T, -1, -2))
    R = R / np.trace(R, axis1=-2, axis2=-1)[..., None, None]
    B = ptm.pauli_basis(d)
    return np.real(np.einsum("kab,...ba->...k", B, R))


def _povm_vecs(x, d, K):
    Bs = _cvec(x, (K, d, d))
    A = np.conj(np.swapaxes(Bs, -1, -2)) @ Bs
    S = A.sum(axis=-3)
    Si = _inv_sqrt(S)[..., None, :, :]
    E = Si @ A @ Si
    B = ptm.pauli_basis(d)
    return np.real(np.einsum("kab,...jba->...jk", B, E))


def _fd_jacobian(fn, x):
    """Central-difference Jacobian of a batched function, shape out + (n,)."""
    n = x.size
    h = _FD_STEP * np.maximum(1.0, np.abs(x))
    X = np.repeat(x[None], 2 * n, axis=0)
    X[np.arange(n), np.arange(n)] += h
    X[n + np.arange(n), np.arange(n)] -= h
    Y = fn(X)
    Jac = (Y[:n] - Y[n:]) / (2 * h).reshape((n,) + (1,) * (Y.ndim - 1))
    return np.moveaxis(Jac, 0, -1)


def _psd_floor(M, floor=_EIG_FLOOR):
    M = 0.5 * (M + M.conj().T)
    w, v = np.linalg.eigh(M)
    w = np.clip(w, floor, None)
    return (v * w) @ v.conj().T


class MleModel:
    """Flat real parameter vector <-> gate set, with Jacobians."""

    def __init__(self, template: GateSet, options: MleOptions):
        self.d = d = template.dim
        self.n = n = d * d
        self.opts = options
        self.povm_labels = list(template.outcomes)
        self.gate_labels = list(template.gates)
        self.instr = {q: Q.m for q, Q in template.instruments.items()}
        self.r = n  # Kraus rank
        slices = {}
        pos = 0

        def take(key, size):
            nonlocal pos
            slices[key] = slice(pos, pos + size)
            pos += size

        take("rho", n)
        take("povm", 2 * len(self.povm_labels) * n)
        gsize = 2 * self.r * n if options.gates == "cptp" else n * (n - 1)
        for g in self.gate_labels:
            take(("gate", g), gsize)
        for q, m in self.instr.items():
            take(("instr", q), m * n * n - n)
        self.slices = slices
        self.size = pos

    # -- forward maps
    def _gate(self, x):
        if self.opts.gates == "cptp":
            return _kraus_ptm(x, self.d, self.r)
        G = np.zeros(x.shape[:-1] + (self.n, self.n))
        G[..., 0, 0] = 1.0
        G[..., 1:, :] = x.reshape(x.shape[:-1] + (self.n - 1, self.n))
        return G

    def _instrument(self, x, m):
        n = self.n
        head = x[..., : (m - 1) * n * n].reshape(x.shape[:-1] + (m - 1, n, n))
        tail = x[..., (m - 1) * n * n:].reshape(x.shape[:-1] + (n - 1, n))
        last = np.zeros(x.shape[:-1] + (1, n, n))
        e0 = np.zeros(n)
        e0[0] = 1.0
        last[..., 0, 0, :] = e0 - head[..., :, 0, :].sum(axis=-2)
        last[..., 0, 1:, :] = tail
        return np.concatenate([head, last], axis=-3)

    def gateset(self, x) -> GateSet:
        d, K = self.d, len(self.povm_labels)
        rho = _rho_vec(x[self.slices["rho"]], d)
        E = _povm_vecs(x[self.slices["povm"]], d, K)
        gates = {g: self._gate(x[self.slices[("gate", g)]]) for g in self.gate_labels}
        instruments = {
            q: QuantumInstrument(list(self._instrument(x[self.slices[("instr", q)]], m)))
            for q, m in self.instr.items()
        }
        return GateSet(rho=rho, gates=gates, instruments=instruments,
                       povm=dict(zip(self.povm_labels, E)), dim=d)

    # -- inverse map (initialization)
    def params_from(self, gs: GateSet) -> np.ndarray:
        d, n = self.d, self.n
        x = np.zeros(self.size)
        R = _psd_floor(ptm.density_matrix(gs.rho))
        R = R / np.trace(R).real
        T = np.linalg.cholesky(R)
        il, isl = np.tril_indices(d), np.tril_indices(d, -1)
        x[self.slices["rho"]] = np.concatenate([T[il].real, T[isl].imag])
        Bs = []
        for e in self.povm_labels:
            E = _psd_floor(ptm.density_matrix(gs.povm[e]))
            w, v = np.linalg.eigh(E)
            Bs.append((v * np.sqrt(np.clip(w, 0, None))) @ v.conj().T)
        x[self.slices["povm"]] = _rvec(np.array(Bs))
        for g in self.gate_labels:
            G = gs.gates[g]
            if self.opts.gates == "cptp":
                J = ptm.choi_of(ptm.project_cptp(G))
                w, v = np.linalg.eigh(0.5 * (J + J.conj().T))
                w = np.clip(w, _EIG_FLOOR, None)
                # J = sum_j vec(K_j) vec(K_j)^dag with output index first
                Ks = [np.sqrt(w[j]) * v[:, j].reshape(d, d) for j in range(n)]
                x[self.slices[("gate", g)]] = _rvec(np.array(Ks))
            else:
                x[self.slices[("gate", g)]] = np.asarray(G)[1:].ravel()
        for q, m in self.instr.items():
            br = [np.asarray(b) for b in gs.instruments[q].branches]
            x[self.slices[("instr", q)]] = np.concatenate(
                [b.ravel() for b in br[:-1]] + [br[-1][1:].ravel()])
        return x

    # -- Jacobians of the operations w.r.t. their own parameters
    def jacobians(self, x):
        d, K = self.d, len(self.povm_labels)
        out = {
            "rho": _fd_jacobian(lambda X: _rho_vec(X, d), x[self.slices["rho"]]),
            "povm": _fd_jacobian(lambda X: _povm_vecs(X, d, K), x[self.slices["povm"]]),
        }
        for g in self.gate_labels:
            xs = x[self.slices[("gate", g)]]
            if self.opts.gates == "cptp":
                out[("gate", g)] = _fd_jacobian(self._gate, xs)
            else:
                out[("gate", g)] = None
        return out


def _log_ext(p, floor):
    """log p above ``floor``; quadratic continuation below.  Returns (f, f')."""
    p = np.asarray(p, dtype=float)
    hi = p >= floor
    pc = np.where(hi, p, floor)
    dp = p - floor
    f = np.where(hi, np.log(pc), np.log(floor) + dp / floor - 0.5 * (dp / floor) ** 2)
    g = np.where(hi, 1.0 / pc, 1.0 / floor - dp / floor ** 2)
    return f, g


class _Objective:
    def __init__(self, model: MleModel, table: CircuitTable, counts: np.ndarray):
        self.model = model
        self.table = table
        self.counts = counts
        self.shots = table.totals(counts)[table.cell_circuit]
        self.ptr, self.seq = table.ptr, table.seq
        self.op_index = {}
        for j, key in enumerate(table.op_keys):
            self.op_index[key] = j

    def ops(self, gs):
        return self.table.ops_array(gs)

    def value_grad(self, x):
        m = self.model
        opts = m.opts
        gs = m.gateset(x)
        ops = self.ops(gs)
        rho = np.ascontiguousarray(gs.rho)
        eff = self.table.effects_array(gs)
        P = kernels.forward(ops, rho, eff, self.ptr, self.seq)
        p = P[self.table.cell_seq, self.table.cell_eff]
        f, fp = _log_ext(p, opts.switch)
        neg = np.minimum(p, 0.0)
        val = (-float(self.counts @ f) + opts.negative_penalty * float(self.shots @ neg ** 2)
               - opts.negative_slope * float(self.shots @ neg))
        dp = (-self.counts * fp + 2.0 * opts.negative_penalty * self.shots * neg
              - opts.negative_slope * self.shots * (neg < 0))
        W = np.zeros_like(P)
        np.add.at(W, (self.table.cell_seq, self.table.cell_eff), dp)
        _, g_ops, g_rho, g_eff = kernels.backward(ops, rho, eff, self.ptr, self.seq, W)

        grad = np.zeros(m.size)
        jac = m.jacobians(x)
        grad[m.slices["rho"]] = g_rho @ jac["rho"]
        grad[m.slices["povm"]] = np.einsum("jk,jkp->p", g_eff, jac["povm"])
        n = m.n
        for g in m.gate_labels:
            j = self.op_index.get(g)
            if j is None:
                continue
            if jac[("gate", g)] is None:
                grad[m.slices[("gate", g)]] = g_ops[j][1:].ravel()
            else:
                grad[m.slices[("gate", g)]] = np.einsum("kl,klp->p", g_ops[j], jac[("gate", g)])
        for q, mq in m.instr.items():
            gb = np.zeros((mq, n, n))
            for i in range(mq):
                j = self.op_index.get((q, i))
                if j is not None:
                    gb[i] = g_ops[j]
            head = gb[:-1].copy()
            head[:, 0, :] -= gb[-1, 0, :]
            grad[m.slices[("instr", q)]] = np.concatenate(
                [head.ravel(), gb[-1, 1:].ravel()])
        return val, grad


def loglikelihood(gs: GateSet, dataset, design, floor: float = 1e-9,
                  context_rules=None, circuits=None) -> float:
    """``sum n log max(p, floor)`` over the design's cells."""
    table = CircuitTable.from_design(design, gs, context_rules, circuits)
    p = table.probs(gs, context_rules)
    n = table.counts(dataset)
    return float(n @ np.log(np.clip(p, floor, None)))


def max_loglikelihood(dataset, design, circuits=None, gs=None) -> float:
    """Log-likelihood of the empirical frequencies (``0 log 0 = 0``)."""
    total = 0.0
    ids = [c.id for c in (circuits or design.circuits)]
    for cid in ids:
        row = dataset.counts[cid]
        N = sum(row.values())
        for v in row.values():
            if v > 0:
                total += v * np.log(v / N)
    return float(total)


def _feasible(gs: GateSet, options: MleOptions, tol: float = 1e-9) -> bool:
    if not ptm.is_physical_state(gs.rho, tol):
        return False
    for e in gs.povm.values():
        if np.linalg.eigvalsh(ptm.density_matrix(e)).min() < -tol:
            return False
    if not np.allclose(sum(gs.povm.values()), ptm.identity_effect(gs.dim), atol=tol):
        return False
    for G in gs.gates.values():
        if not ptm.is_tp(G, tol):
            return False
        if options.gates == "cptp" and not ptm.is_cp(G, tol):
            return False
    return all(Q.is_tp(tol) for Q in gs.instruments.values())


def mle_fit(dataset, design, initial: GateSet, options: MleOptions | None = None,
            return_info: bool = False):
    """Local maximum-likelihood estimate started from ``initial``.

    The result never has a lower log-likelihood than ``initial`` when
    ``initial`` itself satisfies the constraints.  If the iteration limit is
    hit the best iterate is returned with ``converged=False``.
    """
    options = options or MleOptions()
    model = MleModel(initial, options)
    table = CircuitTable.from_design(design, initial)
    counts = table.counts(dataset)
    obj = _Objective(model, table, counts)
    x0 = model.params_from(initial)

    best = {"f": np.inf, "x": x0}

    def fun(x):
        f, g = obj.value_grad(x)
        if f < best["f"]:
            best["f"], best["x"] = f, x.copy()
        return f, g

    res = minimize(fun, x0, jac=True, method="L-BFGS-B",
                   options={"maxiter": options.max_iter, "maxfun": 4 * options.max_iter,
                            "ftol": options.tol, "gtol": 1e-9, "maxcor": 30})
    fit = model.gateset(best["x"])
    ll0 = loglikelihood(initial, dataset, design, options.floor)
    ll = loglikelihood(fit, dataset, design, options.floor)
    if ll < ll0 and _feasible(initial, options):
        fit, ll = initial, ll0
    info = MleInfo(loglikelihood=ll, initial_loglikelihood=ll0,
                   converged=bool(res.success), iterations=int(res.nit),
                   message=str(res.message))
    return (fit, info) if return_info else fit
