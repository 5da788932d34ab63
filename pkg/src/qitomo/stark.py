"""Residual-photon Stark shift after a mid-circuit measurement.

Photons left in the readout cavity shift the qubit frequency by
``delta(t) = chi * n_i * exp(-kappa t)``, where ``n_i`` depends on the
measurement outcome ``i``.  To first order in the Magnus expansion the
``m``-th gate after the measurement picks up an extra ``phi sigma_z`` term
in its exponent, with

    phi_{i,m}(t_d) = (chi n_i / kappa) (1 - exp(-kappa t_gate))
                     * exp(-kappa (m t_gate + t_d)).

At the gate level this is ``exp[log G + alpha_i exp(-m r_i) Z]`` with
``Z[rho] = -i sigma_z rho + i rho sigma_z`` and, under the dispersive
model, ``alpha_i = phi_{i,0}`` and ``r_i = kappa t_gate``.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.linalg import expm, logm
from scipy.optimize import minimize

from .errors import ValidationError
from .gateset import GateSet
from .metrics.stats import ModelViolation, model_violation
from .simulate import CircuitTable, ContextRule

STARK_GATES = ("Gx", "Gy")
MAX_POSITION = 3  # measurement fiducials hold at most three gates


@dataclass(frozen=True)
class DeviceParams:
    """Cavity and gate parameters in SI units (rad/s, 1/s, s).

    Defaults are the characterized transmon: chi/2pi = -0.270 MHz,
    1/kappa = 242 ns, n0 = 122, 60 ns gates.  ``n1=None`` derives the
    excited-state population from the cavity line shape: driving at the
    ground-state shifted frequency leaves the excited-state line detuned
    by 2 chi, so ``n1 = n0 / (1 + (4 chi / kappa)^2)``.
    """

    chi: float = 2 * np.pi * -0.270e6
    kappa: float = 1.0 / 242e-9
    n0: float = 122.0
    n1: float | None = None
    t_gate: float = 60e-9
    t_d: float = 2020e-9

    def __post_init__(self):
        if not self.kappa > 0:
            raise ValidationError("kappa must be positive")
        if not self.t_gate > 0:
            raise ValidationError("t_gate must be positive")
        if self.n0 < 0 or (self.n1 is not None and self.n1 < 0):
            raise ValidationError("photon numbers must be non-negative")
        if self.t_d < 0:
            raise ValidationError("delay must be non-negative")

    def photons(self, i: int) -> float:
        if i == 0:
            return float(self.n0)
        if i == 1:
            if self.n1 is not None:
                return float(self.n1)
            return float(self.n0 / (1.0 + (4.0 * self.chi / self.kappa) ** 2))
        raise ValidationError(f"outcome must be 0 or 1, got {i}")

    def at(self, t_d: float) -> "DeviceParams":
        return replace(self, t_d=float(t_d))


@dataclass(frozen=True)
class StarkFitParams:
    alpha0: float
    alpha1: float
    r0: float
    r1: float

    def alpha(self, i: int) -> float:
        return (self.alpha0, self.alpha1)[i]

    def r(self, i: int) -> float:
        return (self.r0, self.r1)[i]

    def phase(self, i: int, m: int) -> float:
        return self.alpha(i) * np.exp(-m * self.r(i))

    def to_dict(self) -> dict:
        return {"alpha0": self.alpha0, "alpha1": self.alpha1, "r0": self.r0, "r1": self.r1}

    def as_array(self) -> np.ndarray:
        return np.array([self.alpha0, self.alpha1, self.r0, self.r1])


def dispersive_phase(p: DeviceParams, i: int, m: int, compat: bool = False) -> float:
    """First-order phase error of the ``m``-th gate after outcome ``i``.

    ``compat=True`` uses the prefactor ``chi / n_i`` in place of
    ``chi n_i / kappa``; that variant is dimensionally inconsistent and is
    kept only to reproduce the alternative printed form.
    """
    if m < 0:
        raise ValidationError("gate index m must be non-negative")
    n = p.photons(i)
    if compat:
        if n == 0:
            raise ValidationError("chi / n_i is undefined for n_i = 0")
        pref = p.chi / n
    else:
        pref = p.chi * n / p.kappa
    return float(pref * (1.0 - np.exp(-p.kappa * p.t_gate))
                 * np.exp(-p.kappa * (m * p.t_gate + p.t_d)))


def alpha_from_device(p: DeviceParams, compat: bool = False) -> tuple:
    return (dispersive_phase(p, 0, 0, compat), dispersive_phase(p, 1, 0, compat))


def r_from_device(p: DeviceParams) -> float:
    return float(p.kappa * p.t_gate)


def predicted_params(p: DeviceParams, compat: bool = False) -> StarkFitParams:
    a0, a1 = alpha_from_device(p, compat)
    r = r_from_device(p)
    return StarkFitParams(a0, a1, r, r)


def z_generator() -> np.ndarray:
    """PTM of ``rho -> -i sigma_z rho + i rho sigma_z``."""
    Z = np.zeros((4, 4))
    Z[2, 1] = 2.0
    Z[1, 2] = -2.0
    return Z


def real_log(G, label: str = "gate", tol: float = 1e-8) -> np.ndarray:
    L = logm(np.asarray(G, dtype=float))
    if not np.all(np.isfinite(L)) or np.abs(np.imag(L)).max() > tol:
        raise ValidationError(f"{label} has no real matrix logarithm")
    return np.real(L)


def stark_gate(base, alpha: float, r: float, m: int, log_base=None) -> np.ndarray:
    """``exp[log(base) + alpha exp(-m r) Z]``."""
    L = real_log(base) if log_base is None else log_base
    if alpha == 0.0:
        return np.array(base, dtype=float)
    return np.real(expm(L + alpha * np.exp(-m * r) * z_generator()))


def stark_context_rules(base: GateSet, params: StarkFitParams, instrument: str = "Q",
                        gates=STARK_GATES, include_idle: bool = False, idle: str = "Gi",
                        positions: int = MAX_POSITION, logs=None) -> ContextRule:
    """Outcome- and position-dependent replacements for the gates after ``instrument``."""
    labels = list(gates) + ([idle] if include_idle and idle in base.gates else [])
    if instrument not in base.instruments:
        raise ValidationError(f"gate set has no instrument {instrument!r}")
    logs = logs or {g: real_log(base.gates[g], g) for g in labels}
    subs = {}
    for g in labels:
        if g not in base.gates:
            raise ValidationError(f"gate set has no gate {g!r}")
        for i in range(base.instruments[instrument].m):
            for m in range(positions):
                subs[(i, m, g)] = stark_gate(base.gates[g], params.alpha(i), params.r(i), m,
                                             logs[g])
    return ContextRule(instrument=instrument, substitutions=subs)


@dataclass
class StarkFit:
    params: StarkFitParams
    start: StarkFitParams
    loglikelihood: float
    start_loglikelihood: float
    converged: bool
    violation: ModelViolation | None = None


def _instrument_ll(table, base, rule, counts, floor):
    p = table.probs(base, rule)
    return float(counts @ np.log(np.clip(p, floor, None)))


def fit_stark(dataset, base: GateSet, design, start: StarkFitParams | None = None,
              device: DeviceParams | None = None, instrument: str = "Q",
              gates=STARK_GATES, include_idle: bool = False, constrain_r: bool = True,
              floor: float = 1e-9, max_iter: int = 4000) -> StarkFit:
    """Fit ``(alpha0, alpha1, r0, r1)`` with the base gate set frozen.

    Only instrument circuits depend on the parameters, so only they are
    evaluated during the search.  The simplex starts at ``start`` (default:
    the dispersive prediction for ``device``).  The returned fit is never
    worse than the start.
    """
    if start is None:
        start = predicted_params(device or DeviceParams())
    circuits = design.instrument_circuits(instrument)
    if not circuits:
        raise ValidationError(f"design has no circuits with instrument {instrument!r}")
    labels = list(gates) + (["Gi"] if include_idle and "Gi" in base.gates else [])
    logs = {g: real_log(base.gates[g], g) for g in labels}
    probe = stark_context_rules(base, start, instrument, gates, include_idle, logs=logs)
    table = CircuitTable(circuits, base, design.outcomes, {instrument: probe.substitutions.keys()})
    counts = table.counts(dataset)

    def unpack(x):
        a0, a1, r0, r1 = x
        if constrain_r:
            r0, r1 = abs(r0), abs(r1)
        return StarkFitParams(float(a0), float(a1), float(r0), float(r1))

    def nll(x):
        rule = stark_context_rules(base, unpack(x), instrument, gates, include_idle, logs=logs)
        return -_instrument_ll(table, base, rule, counts, floor)

    x0 = start.as_array()
    f0 = nll(x0)
    step = np.where(np.abs(x0) > 1e-3, 0.1 * np.abs(x0), 0.05)
    simplex = np.vstack([x0] + [x0 + np.eye(4)[k] * step[k] for k in range(4)])
    res = minimize(nll, x0, method="Nelder-Mead",
                   options={"initial_simplex": simplex, "xatol": 1e-7, "fatol": 1e-7,
                            "maxiter": max_iter, "maxfev": 2 * max_iter})
    if res.fun <= f0:
        params, f = unpack(res.x), float(res.fun)
    else:
        params, f = start, f0
    rule = stark_context_rules(base, params, instrument, gates, include_idle, logs=logs)
    mv = model_violation(base, dataset, design, n_fit_params=4, context_rules=rule)
    return StarkFit(params=params, start=start, loglikelihood=-f, start_loglikelihood=-f0,
                    converged=bool(res.success), violation=mv)
