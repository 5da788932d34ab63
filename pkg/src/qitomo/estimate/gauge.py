"""Gauge optimization toward a target gate set.

Every estimate is only defined up to ``X -> M X M^-1``, ``rho -> M rho``,
``E -> E M^-1``.  The gauge matrix keeps its first row at ``(1, 0, ..., 0)``
so trace preservation survives the transformation.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares

from ..errors import ValidationError
from ..gateset import GateSet

DEFAULT_WEIGHTS = {"gates": 1.0, "instruments": 1.0, "spam": 0.1}
MAX_COND = 1e12


@dataclass(frozen=True)
class GaugeElement:
    M: np.ndarray

    def __post_init__(self):
        M = np.array(self.M, dtype=float)
        e0 = np.zeros(M.shape[1])
        e0[0] = 1.0
        if M.ndim != 2 or M.shape[0] != M.shape[1] or not np.array_equal(M[0], e0):
            raise ValidationError("gauge matrix must be square with first row (1, 0, ..., 0)")
        if not np.isfinite(np.linalg.cond(M)) or np.linalg.cond(M) > MAX_COND:
            raise ValidationError("gauge matrix is singular")
        M.setflags(write=False)
        object.__setattr__(self, "M", M)

    @classmethod
    def from_params(cls, x, n: int) -> "GaugeElement":
        return cls(_matrix(x, n))

    @staticmethod
    def identity(n: int) -> "GaugeElement":
        return GaugeElement(np.eye(n))


def _matrix(x, n):
    M = np.eye(n)
    M[1:] = np.asarray(x, dtype=float).reshape(n - 1, n)
    return M


def _resolve_weights(est: GateSet, weights) -> dict:
    w = dict(DEFAULT_WEIGHTS)
    w.update(weights or {})
    out = {}
    for g in est.gates:
        out[g] = float(w.get(g, w["gates"]))
    for q in est.instruments:
        out[q] = float(w.get(q, w["instruments"]))
    out["rho"] = float(w.get("rho", w["spam"]))
    for e in est.povm:
        out["E" + e] = float(w.get("E" + e, w["spam"]))
    return out


def gauge_objective(est: GateSet, target: GateSet, M, weights=None) -> float:
    r = _residuals(est, target, np.asarray(M, dtype=float), _resolve_weights(est, weights))
    return float(r @ r)


def _residuals(est, target, M, w):
    Mi = np.linalg.inv(M)
    parts = []
    for g, X in est.gates.items():
        if w[g] and g in target.gates:
            parts.append(np.sqrt(w[g]) * (M @ X @ Mi - target.gates[g]).ravel())
    for q, Q in est.instruments.items():
        if w[q] and q in target.instruments:
            for X, T in zip(Q.branches, target.instruments[q].branches):
                parts.append(np.sqrt(w[q]) * (M @ X @ Mi - T).ravel())
    if w["rho"]:
        parts.append(np.sqrt(w["rho"]) * (M @ est.rho - target.rho))
    for e, E in est.povm.items():
        if w["E" + e] and e in target.povm:
            parts.append(np.sqrt(w["E" + e]) * (E @ Mi - target.povm[e]))
    return np.concatenate(parts) if parts else np.zeros(1)


def find_gauge(est: GateSet, target: GateSet, weights=None, restarts: int = 5,
               seed: int = 0, scale: float = 0.05) -> GaugeElement:
    """Gauge element minimizing the weighted squared Frobenius discrepancy.

    Local least squares from the identity plus ``restarts`` perturbed starts;
    the best point found (the identity included) is returned.
    """
    n = est.dim * est.dim
    w = _resolve_weights(est, weights)
    size = len(_residuals(est, target, np.eye(n), w))

    def fun(x):
        M = _matrix(x, n)
        if np.linalg.cond(M) > MAX_COND:
            return np.full(size, 1e6)
        return _residuals(est, target, M, w)

    x_id = np.eye(n)[1:].ravel()
    best_x, best_f = x_id, float(fun(x_id) @ fun(x_id))
    rng = np.random.default_rng(seed)
    starts = [x_id] + [x_id + scale * rng.normal(size=x_id.size) for _ in range(restarts)]
    for x0 in starts:
        try:
            res = least_squares(fun, x0, method="lm", xtol=1e-15, ftol=1e-15, gtol=1e-15,
                                max_nfev=20000)
        except (np.linalg.LinAlgError, ValueError):
            continue
        f = float(res.fun @ res.fun)
        if f < best_f and np.linalg.cond(_matrix(res.x, n)) <= MAX_COND:
            best_x, best_f = res.x, f
    return GaugeElement.from_params(best_x, n)


def gauge_optimize(est: GateSet, target: GateSet, weights=None, restarts: int = 5,
                   seed: int = 0, return_gauge: bool = False):
    """Transform ``est`` into the gauge closest to ``target``.

    Default weights: 1.0 per gate, 1.0 per instrument branch, 0.1 for the
    state and each effect.  Keys may name a class (``gates``,
    ``instruments``, ``spam``) or a single label (``Gx``, ``Q``, ``rho``,
    ``E0``).
    """
    g = find_gauge(est, target, weights, restarts, seed)
    out = est.transform(g.M)
    return (out, g) if return_gauge else out
