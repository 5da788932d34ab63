"""Readout fidelity and the decomposition of a two-outcome qubit instrument."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import ptm
from ..design import OUTCOME_SEP, Circuit
from ..errors import ValidationError
from ..gateset import GateSet
from ..ptm import QuantumInstrument
from ..simulate import Dataset, circuit_probs

P_MIN = 1e-9
PI_PULSE = ("Gx", "Gx")


def _marginal(dist: dict, i: int) -> float:
    tot = sum(dist.values())
    hit = sum(v for k, v in dist.items() if k.split(OUTCOME_SEP)[0] == str(i))
    return hit / tot


@dataclass
class ReadoutFidelity:
    F: float
    P00: float
    P11: float

    def to_dict(self) -> dict:
        return {"F": self.F, "P0|0": self.P00, "P1|1": self.P11}


def readout_fidelity(source, instrument: str = "Q", pi_pulse=PI_PULSE,
                     context_rules=None) -> ReadoutFidelity:
    """``F = (P_0|0 + P_1|1) / 2`` from mid-circuit marginals.

    ``P_0|0`` comes from the prepare-measure-measure circuit and ``P_1|1``
    from the same circuit preceded by ``pi_pulse``.  ``source`` is a
    :class:`Dataset` (observed) or a :class:`GateSet` (predicted).
    """
    c0 = Circuit((instrument,))
    c1 = Circuit(tuple(pi_pulse) + (instrument,))
    if isinstance(source, Dataset):
        missing = [c.id for c in (c0, c1) if c.id not in source.counts]
        if missing:
            raise ValidationError(f"dataset lacks readout circuits: {', '.join(missing)}")
        d0, d1 = source.counts[c0.id], source.counts[c1.id]
    elif isinstance(source, GateSet):
        if instrument not in source.instruments:
            raise ValidationError(f"gate set has no instrument {instrument!r}")
        d0 = circuit_probs(source, c0, context_rules)
        d1 = circuit_probs(source, c1, context_rules)
    else:
        raise ValidationError("source must be a Dataset or a GateSet")
    P00, P11 = _marginal(d0, 0), _marginal(d1, 1)
    return ReadoutFidelity(F=0.5 * (P00 + P11), P00=P00, P11=P11)


@dataclass
class InstrumentReport:
    p: np.ndarray  # p[i, j] = Tr Q_i[|j><j|]
    states: dict  # (i, j) -> normalized Bloch vector of rho_i|j, None if p below floor
    z: tuple  # Bloch z of rho_i|i
    fidelities: tuple  # F(rho_i|i, |i><i|)
    coherence: dict  # branch -> {"xx", "yy", "xy", "yx"} PTM entries
    F_tilde: float

    def to_dict(self) -> dict:
        return {
            "p": {f"{i}|{j}": float(self.p[i, j]) for i in range(2) for j in range(2)},
            "states": {
                f"{i}|{j}": (None if v is None else [float(x) for x in v])
                for (i, j), v in self.states.items()
            },
            "z": [float(x) for x in self.z],
            "state_fidelities": [float(x) for x in self.fidelities],
            "coherence": self.coherence,
            "F_tilde": self.F_tilde,
        }


def instrument_report(Q: QuantumInstrument, p_floor: float = P_MIN) -> InstrumentReport:
    if Q.m != 2 or Q.branches[0].shape != (4, 4):
        raise ValidationError("instrument report needs a two-outcome qubit instrument")
    p = np.zeros((2, 2))
    states = {}
    for j in range(2):
        out = ptm.instrument_apply(Q, ptm.basis_state(j), p_floor)
        for i, (pi, rho) in enumerate(out):
            p[i, j] = pi
            states[(i, j)] = None if rho is None else ptm.bloch_vector(rho)
    z, fids = [], []
    for i in range(2):
        if states[(i, i)] is None:
            raise ValidationError(f"p_{i}|{i} below floor; conditional state undefined")
        z.append(float(states[(i, i)][2]))
        rho = ptm.instrument_apply(Q, ptm.basis_state(i), p_floor)[i][1]
        # estimates need not be CP; slightly negative eigenvalues are clipped
        fids.append(ptm.state_fidelity(rho, ptm.basis_state(i), tol=np.inf))
    coherence = {}
    for i, B in enumerate(Q.branches):
        coherence[str(i)] = {"xx": float(B[1, 1]), "yy": float(B[2, 2]),
                             "xy": float(B[1, 2]), "yx": float(B[2, 1])}
    return InstrumentReport(p=p, states=states, z=tuple(z), fidelities=tuple(fids),
                            coherence=coherence, F_tilde=float(0.5 * (p[0, 0] + p[1, 1])))
