"""Forward model: exact outcome distributions and multinomial datasets.

Circuits hold at most one instrument.  At the instrument the state splits
into one unnormalized branch per outcome, each continuing through the rest
of the circuit; context rules may swap the gates that follow the
instrument depending on the branch outcome and on how many gates have
elapsed since it.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from . import kernels
from .design import OUTCOME_SEP, Circuit, ExperimentDesign, parse_id
from .errors import ValidationError

NEGATIVE_TOL = 1e-9
SUM_TOL = 1e-9


@dataclass(frozen=True)
class ContextRule:
    """Gate replacements after an instrument.

    ``substitutions[(outcome, position, gate_label)]`` is the process matrix
    used for ``gate_label`` when it is the ``position``-th gate (0-based)
    after ``instrument`` reported ``outcome``.  Missing keys fall back to
    the gate set's own gate.
    """

    instrument: str
    substitutions: Mapping = field(default_factory=dict)


def _rules_by_instrument(rules) -> dict:
    if rules is None:
        return {}
    if isinstance(rules, ContextRule):
        rules = [rules]
    out = {}
    for r in rules:
        if r.instrument in out:
            raise ValidationError(f"two context rules for instrument {r.instrument!r}")
        out[r.instrument] = r
    return out


def propagate(gs, circuit, rho=None) -> np.ndarray:
    """Apply the gates of an instrument-free circuit to ``rho``."""
    v = gs.rho if rho is None else np.asarray(rho, dtype=float)
    for lab in Circuit(circuit).layers:
        if lab not in gs.gates:
            raise ValidationError(f"unknown gate label {lab!r}")
        v = gs.gates[lab] @ v
    return v


def circuit_probs(gs, circuit, context_rules=None) -> dict:
    """Outcome distribution of one circuit, evaluated layer by layer."""
    circuit = circuit if isinstance(circuit, Circuit) else parse_id(circuit)
    rules = _rules_by_instrument(context_rules)
    n_instr = sum(1 for lab in circuit.layers if lab in gs.instruments)
    if n_instr > 1:
        raise ValidationError(f"circuit {circuit.id} holds more than one instrument")
    branches = [("", gs.rho, None, 0)]  # prefix, state, instrument, gates since
    for lab in circuit.layers:
        nxt = []
        if lab in gs.instruments:
            for prefix, v, _, _ in branches:
                for i, Qi in enumerate(gs.instruments[lab].branches):
                    nxt.append((f"{i}", Qi @ v, (lab, i), 0))
        elif lab in gs.gates:
            for prefix, v, ctx, pos in branches:
                G = gs.gates[lab]
                if ctx is not None:
                    rule = rules.get(ctx[0])
                    if rule is not None:
                        G = rule.substitutions.get((ctx[1], pos, lab), G)
                    pos += 1
                nxt.append((prefix, G @ v, ctx, pos))
        else:
            raise ValidationError(f"unknown label {lab!r} in circuit {circuit.id}")
        branches = nxt
    out = {}
    for prefix, v, _, _ in branches:
        for e, E in gs.povm.items():
            key = f"{prefix}{OUTCOME_SEP}{e}" if prefix else e
            out[key] = float(E @ v)
    return out


class CircuitTable:
    """Flattened layout of a list of circuits for the compiled kernels.

    Each circuit becomes one operation sequence per instrument branch
    (one if it holds no instrument).  A *cell* is a (circuit, outcome) pair,
    stored circuit-major in the order of the design's outcome alphabet.
    """

    def __init__(self, circuits, gs, outcomes: Mapping | None = None, rule_keys=None):
        circuits = [c if isinstance(c, Circuit) else parse_id(c) for c in circuits]
        rule_keys = {k: set(v) for k, v in (rule_keys or {}).items()}
        self.circuits = circuits
        self.ids = [c.id for c in circuits]
        self.povm_labels = list(gs.outcomes)
        eff_index = {e: j for j, e in enumerate(self.povm_labels)}
        self.op_keys: list = []
        index: dict = {}

        def op(key):
            if key not in index:
                index[key] = len(self.op_keys)
                self.op_keys.append(key)
            return index[key]

        ptr = [0]
        seq: list = []
        cell_seq, cell_eff, offsets, cell_outcomes = [], [], [0], []
        for c in circuits:
            pos = [t for t, lab in enumerate(c.layers) if lab in gs.instruments]
            if len(pos) > 1:
                raise ValidationError(f"circuit {c.id} holds more than one instrument")
            for lab in c.layers:
                if not gs.has_label(lab):
                    raise ValidationError(f"unknown label {lab!r} in circuit {c.id}")
            seq_of_branch = {}
            if not pos:
                seq.extend(op(lab) for lab in c.layers)
                ptr.append(len(seq))
                seq_of_branch[None] = len(ptr) - 2
            else:
                p = pos[0]
                qlab = c.layers[p]
                keys = rule_keys.get(qlab, set())
                for i in range(gs.instruments[qlab].m):
                    seq.extend(op(lab) for lab in c.layers[:p])
                    seq.append(op((qlab, i)))
                    for m, lab in enumerate(c.layers[p + 1:]):
                        k = (i, m, lab)
                        seq.append(op(("ctx", qlab) + k) if k in keys else op(lab))
                    ptr.append(len(seq))
                    seq_of_branch[str(i)] = len(ptr) - 2
            alphabet = (outcomes or {}).get(c.id)
            if alphabet is None:
                if pos:
                    alphabet = [f"{b}{OUTCOME_SEP}{e}" for b in seq_of_branch for e in self.povm_labels]
                else:
                    alphabet = list(self.povm_labels)
            for o in alphabet:
                parts = o.split(OUTCOME_SEP)
                if (len(parts) == 2) != bool(pos):
                    raise ValidationError(f"outcome {o!r} does not fit circuit {c.id}")
                b = parts[0] if pos else None
                if b not in seq_of_branch or parts[-1] not in eff_index:
                    raise ValidationError(f"outcome {o!r} does not fit circuit {c.id}")
                cell_seq.append(seq_of_branch[b])
                cell_eff.append(eff_index[parts[-1]])
                cell_outcomes.append(o)
            offsets.append(len(cell_seq))
        self.ptr = np.asarray(ptr, dtype=np.intp)
        self.seq = np.asarray(seq, dtype=np.intp)
        self.cell_seq = np.asarray(cell_seq, dtype=np.intp)
        self.cell_eff = np.asarray(cell_eff, dtype=np.intp)
        self.offsets = np.asarray(offsets, dtype=np.intp)
        self.cell_outcomes = cell_outcomes
        self.cell_circuit = np.repeat(np.arange(len(circuits)), np.diff(self.offsets))

    @classmethod
    def from_design(cls, design: ExperimentDesign, gs, rules=None, circuits=None):
        rules = _rules_by_instrument(rules)
        keys = {k: r.substitutions.keys() for k, r in rules.items()}
        return cls(circuits or design.circuits, gs, design.outcomes, keys)

    @property
    def n_cells(self) -> int:
        return len(self.cell_seq)

    def ops_array(self, gs, rules=None) -> np.ndarray:
        rules = _rules_by_instrument(rules)
        mats = []
        for key in self.op_keys:
            if isinstance(key, str):
                mats.append(gs.gates[key])
            elif key[0] == "ctx":
                _, q, i, m, lab = key
                mats.append(rules[q].substitutions[(i, m, lab)])
            else:
                mats.append(gs.instruments[key[0]].branches[key[1]])
        n = gs.dim * gs.dim
        if not mats:
            return np.zeros((0, n, n))
        return np.ascontiguousarray(np.array(mats, dtype=float))

    def effects_array(self, gs) -> np.ndarray:
        return np.ascontiguousarray(np.array([gs.povm[e] for e in self.povm_labels], dtype=float))

    def seq_probs(self, gs, rules=None, ops=None) -> np.ndarray:
        ops = self.ops_array(gs, rules) if ops is None else ops
        return kernels.forward(
            ops, np.ascontiguousarray(gs.rho, dtype=float), self.effects_array(gs),
            self.ptr, self.seq,
        )

    def probs(self, gs, rules=None) -> np.ndarray:
        """Cell probabilities, circuit-major."""
        P = self.seq_probs(gs, rules)
        return P[self.cell_seq, self.cell_eff]

    def circuit_dists(self, gs, rules=None) -> dict:
        p = self.probs(gs, rules)
        out = {}
        for j, cid in enumerate(self.ids):
            a, b = self.offsets[j], self.offsets[j + 1]
            out[cid] = dict(zip(self.cell_outcomes[a:b], p[a:b].tolist()))
        return out

    def counts(self, dataset: "Dataset") -> np.ndarray:
        """Observed counts aligned with the cells."""
        out = np.zeros(self.n_cells)
        missing = [cid for cid in self.ids if cid not in dataset.counts]
        if missing:
            raise ValidationError(f"dataset lacks circuits: {', '.join(missing[:10])}")
        for j, cid in enumerate(self.ids):
            row = dataset.counts[cid]
            a = self.offsets[j]
            for k, o in enumerate(self.cell_outcomes[a:self.offsets[j + 1]]):
                out[a + k] = row.get(o, 0)
            extra = set(row) - set(self.cell_outcomes[a:self.offsets[j + 1]])
            if any(row[o] for o in extra):
                raise ValidationError(f"circuit {cid} has counts for unknown outcomes {sorted(extra)}")
        return out

    def totals(self, cell_values) -> np.ndarray:
        """Per-circuit sums of a cell-aligned array."""
        return np.add.reduceat(cell_values, self.offsets[:-1]) if self.n_cells else np.zeros(0)


@dataclass
class Dataset:
    """Counts per circuit id and outcome string."""

    counts: dict
    shots: int | None = None
    seed: int | None = None

    def __post_init__(self):
        if self.shots is not None:
            for cid, row in self.counts.items():
                tot = sum(row.values())
                if abs(tot - self.shots) > 1e-6 * max(1, self.shots):
                    raise ValidationError(f"counts for {cid} sum to {tot}, not {self.shots}")

    def __contains__(self, cid):
        return cid in self.counts

    def frequencies(self, cid: str) -> dict:
        row = self.counts[cid]
        tot = sum(row.values())
        return {k: v / tot for k, v in row.items()}

    def to_dict(self) -> dict:
        def num(v):
            return int(v) if float(v).is_integer() else float(v)

        return {
            "shots": self.shots,
            "seed": self.seed,
            "counts": {c: {o: num(n) for o, n in row.items()} for c, row in self.counts.items()},
        }

    @classmethod
    def from_dict(cls, d) -> "Dataset":
        try:
            counts = {str(c): {str(o): n for o, n in row.items()} for c, row in d["counts"].items()}
        except (KeyError, AttributeError, TypeError) as exc:
            raise ValidationError(f"malformed dataset: {exc}") from exc
        return cls(counts=counts, shots=d.get("shots"), seed=d.get("seed"))

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=1)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def subseed(seed: int, circuit_id: str) -> int:
    """64-bit seed from BLAKE2b of ``"<seed>:<circuit id>"``, little endian."""
    h = hashlib.blake2b(f"{int(seed)}:{circuit_id}".encode(), digest_size=8)
    return int.from_bytes(h.digest(), "little")


def _clean(p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.min() < -NEGATIVE_TOL:
        raise ValidationError(f"model predicts a negative probability ({p.min():.3g})")
    p = np.clip(p, 0.0, None)
    s = p.sum()
    if s <= 0:
        raise ValidationError("distribution has no probability mass")
    return p / s


def sample(dist: Mapping, N: int, seed=None) -> dict:
    """Multinomial draw of ``N`` shots; ``seed`` may be an int or a Generator."""
    if int(N) != N or N < 1:
        raise ValidationError(f"shot count must be a positive integer, got {N}")
    keys = list(dist)
    p = _clean([dist[k] for k in keys])
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    draw = rng.multinomial(int(N), p)
    return {k: int(n) for k, n in zip(keys, draw)}


def simulate_design(gs, design: ExperimentDesign, N: int, seed: int, context_rules=None) -> Dataset:
    if int(N) != N or N < 1:
        raise ValidationError(f"shot count must be a positive integer, got {N}")
    table = CircuitTable.from_design(design, gs, context_rules)
    p = table.probs(gs, context_rules)
    _check_sums(table, p)
    counts = {}
    for j, cid in enumerate(table.ids):
        a, b = table.offsets[j], table.offsets[j + 1]
        dist = dict(zip(table.cell_outcomes[a:b], p[a:b]))
        counts[cid] = sample(dist, N, subseed(seed, cid))
    return Dataset(counts=counts, shots=int(N), seed=int(seed))


def exact_dataset(gs, design: ExperimentDesign, N: float = 1.0, context_rules=None) -> Dataset:
    """Expected counts ``N * p`` (the infinite-statistics limit when normalized)."""
    table = CircuitTable.from_design(design, gs, context_rules)
    p = table.probs(gs, context_rules)
    counts = {}
    for j, cid in enumerate(table.ids):
        a, b = table.offsets[j], table.offsets[j + 1]
        counts[cid] = {o: float(N * x) for o, x in zip(table.cell_outcomes[a:b], p[a:b])}
    return Dataset(counts=counts, shots=None, seed=None)


def _check_sums(table, p):
    tot = table.totals(p)
    bad = np.flatnonzero(np.abs(tot - 1.0) > 1e-6)
    if bad.size:
        raise ValidationError(
            f"probabilities of {table.ids[bad[0]]} sum to {tot[bad[0]]:.9f}; model is not trace preserving"
        )


def iter_dists(table: CircuitTable, p) -> Iterable:
    for j, cid in enumerate(table.ids):
        a, b = table.offsets[j], table.offsets[j + 1]
        yield cid, table.cell_outcomes[a:b], p[a:b]
