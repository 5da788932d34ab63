"""Assemble every figure of merit for one estimate into a JSON-ready dict."""
from __future__ import annotations

from ..gateset import GateSet
from .diamond import half_diamond_distance
from .measurement import instrument_report, readout_fidelity
from .stats import model_violation


def build_report(estimate: GateSet, target: GateSet, dataset=None, design=None,
                 instrument: str = "Q", n_fit_params: int | None = None) -> dict:
    """Report JSON: diamond distances, readout fidelities, instrument
    decomposition and, when data are given, the model-violation block."""
    Q, Qt = estimate.instruments[instrument], target.instruments[instrument]
    out = {
        "epsilon_diamond": half_diamond_distance(Q, Qt),
        "epsilon_diamond_gates": {
            g: half_diamond_distance(G, target.gates[g])
            for g, G in estimate.gates.items() if g in target.gates
        },
        "readout_fidelity": {"predicted": readout_fidelity(estimate, instrument).to_dict()},
        "instrument": instrument_report(Q).to_dict() if Q.m == 2 and estimate.dim == 2 else None,
    }
    if dataset is not None:
        try:
            out["readout_fidelity"]["observed"] = readout_fidelity(dataset, instrument).to_dict()
        except ValueError:
            out["readout_fidelity"]["observed"] = None
        if design is not None:
            mv = model_violation(estimate, dataset, design, n_fit_params=n_fit_params)
            out["model_violation"] = mv.to_dict()
    return out


def report_scalars(target: GateSet, instrument: str = "Q") -> dict:
    """Scalar functions of a fitted gate set used for bootstrap intervals."""

    def eps(gs):
        return half_diamond_distance(gs.instruments[instrument], target.instruments[instrument])

    def F(gs):
        return readout_fidelity(gs, instrument).F

    def p(i, j):
        return lambda gs: instrument_report(gs.instruments[instrument]).p[i, j]

    def fid(i):
        return lambda gs: instrument_report(gs.instruments[instrument]).fidelities[i]

    return {
        "epsilon_diamond": eps,
        "readout_fidelity": F,
        "p0|0": p(0, 0),
        "p1|1": p(1, 1),
        "state_fidelity0": fid(0),
        "state_fidelity1": fid(1),
    }
