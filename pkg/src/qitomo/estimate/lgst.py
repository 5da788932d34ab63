"""Linear-inversion gate set tomography with quantum instruments.

With effect rows ``A`` (measurement fiducials) and state columns ``B``
(preparation fiducials) the probability matrices are

    I~ = A B,   G~ = A G B,   Q~_i = A Q_i B   (one block per outcome i).

``I~`` is truncated to its ``d^2`` leading singular directions ``U, V`` and
every estimate is expressed in the frame fixed by the target's ``B V``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..design import OUTCOME_SEP, Circuit, FiducialSet, default_fiducials, spam_matrices
from ..errors import InformationalCompletenessError, ValidationError
from ..gateset import GateSet
from ..ptm import QuantumInstrument

RANK_RTOL = 1e-10


@dataclass
class LinearInversionScaffold:
    """Frequency matrices of a QILGST dataset.

    Rows are ``(meas fiducial, outcome)`` pairs, columns preparation
    fiducials.  ``instruments[label]`` stacks one block per outcome.
    """

    I: np.ndarray
    gates: dict
    instruments: dict
    rho_rows: np.ndarray  # measurement fiducials alone
    effect_cols: dict  # outcome -> preparation fiducials alone


def _freq(dataset, circuit: Circuit, outcome: str) -> float:
    cid = circuit.id
    if cid not in dataset.counts:
        raise ValidationError(f"dataset lacks circuit {cid}")
    row = dataset.counts[cid]
    tot = sum(row.values())
    if tot <= 0:
        raise ValidationError(f"circuit {cid} has no counts")
    return row.get(outcome, 0) / tot


def build_scaffold(dataset, target: GateSet, fiducials: FiducialSet,
                   gate_labels, instrument_labels) -> LinearInversionScaffold:
    outs = target.outcomes
    preps, meas = fiducials.preps, fiducials.meas

    def block(germ: Circuit, prefix: str = ""):
        return np.array([
            [_freq(dataset, p + germ + m, prefix + e) for p in preps]
            for m in meas for e in outs
        ])

    empty = Circuit(())
    I = block(empty)
    gates = {g: block(Circuit((g,))) for g in gate_labels}
    instruments = {}
    for q in instrument_labels:
        germ = Circuit((q,))
        instruments[q] = [
            block(germ, f"{i}{OUTCOME_SEP}") for i in range(target.instruments[q].m)
        ]
    rho_rows = np.array([_freq(dataset, m, e) for m in meas for e in outs])
    effect_cols = {e: np.array([_freq(dataset, p, e) for p in preps]) for e in outs}
    return LinearInversionScaffold(I, gates, instruments, rho_rows, effect_cols)


def lgst(dataset, design, fiducials: FiducialSet | None, target: GateSet) -> GateSet:
    """Closed-form estimate of every operation in ``design``.

    Raises :class:`InformationalCompletenessError` when the null-operation
    matrix or the target's fiducial frame has rank below ``d^2``.
    """
    fiducials = fiducials or design.fiducials or default_fiducials()
    gate_labels = [g for g in (design.gate_labels or target.gates) if g in target.gates]
    instrument_labels = [
        q for q in (design.instrument_labels or target.instruments) if q in target.instruments
    ]
    n = target.dim * target.dim
    sc = build_scaffold(dataset, target, fiducials, gate_labels, instrument_labels)

    U, s, Vt = np.linalg.svd(sc.I)
    if len(s) < n or s[n - 1] <= RANK_RTOL * s[0]:
        raise InformationalCompletenessError(
            f"null-operation probability matrix I~ has rank < {n} "
            f"(singular values {np.array2string(s, precision=3)})"
        )
    U4 = U[:, :n]
    V4 = Vt[:n].T
    _, B_t = spam_matrices(target, fiducials)
    b_t = B_t @ V4
    sb = np.linalg.svd(b_t, compute_uv=False)
    if sb[-1] <= RANK_RTOL * sb[0]:
        raise InformationalCompletenessError(
            "target preparation fiducial matrix B is degenerate on the data's support"
        )
    b_inv = np.linalg.inv(b_t)
    Ir_inv = np.linalg.inv(U4.T @ sc.I @ V4)

    def estimate(X):
        return b_t @ Ir_inv @ (U4.T @ X @ V4) @ b_inv

    gates = {g: estimate(X) for g, X in sc.gates.items()}
    instruments = {
        q: QuantumInstrument([estimate(X) for X in blocks])
        for q, blocks in sc.instruments.items()
    }
    rho = b_t @ Ir_inv @ (U4.T @ sc.rho_rows)
    povm = {e: sc.effect_cols[e] @ V4 @ b_inv for e in target.outcomes}
    return GateSet(rho=rho, gates=gates, instruments=instruments, povm=povm, dim=target.dim)
