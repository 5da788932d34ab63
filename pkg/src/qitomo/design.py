"""Circuits, fiducials, and QILGST experiment designs."""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import InformationalCompletenessError, ValidationError

EMPTY_ID = "{}"
SEP = ":"
OUTCOME_SEP = ";"


@dataclass(frozen=True, order=True)
class Circuit:
    """An ordered sequence of operation labels (first element acts first)."""

    layers: tuple = ()

    def __init__(self, layers=()):
        if isinstance(layers, str):
            layers = parse_id(layers).layers
        layers = tuple(str(x) for x in layers)
        for lab in layers:
            if not lab or SEP in lab or lab == EMPTY_ID:
                raise ValidationError(f"invalid operation label {lab!r}")
        object.__setattr__(self, "layers", layers)

    @property
    def id(self) -> str:
        return canonical_id(self)

    def __add__(self, other: "Circuit") -> "Circuit":
        return Circuit(self.layers + tuple(other.layers))

    def __len__(self):
        return len(self.layers)

    def __iter__(self):
        return iter(self.layers)

    def __str__(self):
        return self.id

    def count(self, label: str) -> int:
        return self.layers.count(label)


def canonical_id(circuit) -> str:
    layers = circuit.layers if isinstance(circuit, Circuit) else tuple(circuit)
    return SEP.join(layers) if layers else EMPTY_ID


def parse_id(cid: str) -> Circuit:
    cid = cid.strip()
    if cid in (EMPTY_ID, ""):
        return Circuit(())
    return Circuit(tuple(cid.split(SEP)))


@dataclass(frozen=True)
class FiducialSet:
    preps: tuple
    meas: tuple

    def __init__(self, preps, meas=None):
        preps = tuple(c if isinstance(c, Circuit) else Circuit(c) for c in preps)
        meas = preps if meas is None else tuple(
            c if isinstance(c, Circuit) else Circuit(c) for c in meas
        )
        if not preps or not meas:
            raise ValidationError("fiducial lists must be non-empty")
        object.__setattr__(self, "preps", preps)
        object.__setattr__(self, "meas", meas)

    def to_dict(self):
        return {"preps": [c.id for c in self.preps], "meas": [c.id for c in self.meas]}

    @classmethod
    def from_dict(cls, d):
        return cls([parse_id(x) for x in d["preps"]], [parse_id(x) for x in d["meas"]])


def default_fiducials() -> FiducialSet:
    """{empty, Gx, Gy, GxGx, GxGxGx, GyGyGy} for both preparation and measurement.

    The empty fiducial is needed for the 6 x 6 = 36 instrument circuits.
    """
    fids = [
        (),
        ("Gx",),
        ("Gy",),
        ("Gx", "Gx"),
        ("Gx", "Gx", "Gx"),
        ("Gy", "Gy", "Gy"),
    ]
    return FiducialSet([Circuit(f) for f in fids])


@dataclass(frozen=True)
class ExperimentDesign:
    circuits: tuple
    outcomes: dict
    fiducials: FiducialSet | None = None
    gate_labels: tuple = ()
    instrument_labels: tuple = ()
    categories: dict = field(default_factory=dict)

    def __post_init__(self):
        ids = [c.id for c in self.circuits]
        if len(set(ids)) != len(ids):
            raise ValidationError("design contains duplicate circuits")
        missing = set(ids) - set(self.outcomes)
        if missing:
            raise ValidationError(f"no outcome alphabet for {sorted(missing)[:3]}")

    def __len__(self):
        return len(self.circuits)

    def __iter__(self):
        return iter(self.circuits)

    @property
    def ids(self) -> list[str]:
        return [c.id for c in self.circuits]

    def instrument_circuits(self, label: str | None = None) -> list[Circuit]:
        labels = (label,) if label else self.instrument_labels
        return [c for c in self.circuits if any(lab in c.layers for lab in labels)]

    def to_dict(self) -> dict:
        d = {"circuits": self.ids, "outcomes": {k: list(v) for k, v in self.outcomes.items()}}
        if self.fiducials is not None:
            d["fiducials"] = self.fiducials.to_dict()
        if self.gate_labels:
            d["gate_labels"] = list(self.gate_labels)
        if self.instrument_labels:
            d["instrument_labels"] = list(self.instrument_labels)
        return d

    @classmethod
    def from_dict(cls, d) -> "ExperimentDesign":
        try:
            circuits = tuple(parse_id(x) for x in d["circuits"])
            outcomes = {k: tuple(v) for k, v in d["outcomes"].items()}
        except (KeyError, TypeError, AttributeError) as exc:
            raise ValidationError(f"malformed design: {exc}") from exc
        fids = FiducialSet.from_dict(d["fiducials"]) if "fiducials" in d else None
        return cls(
            circuits=circuits,
            outcomes=outcomes,
            fiducials=fids,
            gate_labels=tuple(d.get("gate_labels", ())),
            instrument_labels=tuple(d.get("instrument_labels", ())),
        )

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def outcome_alphabet(circuit: Circuit, instrument_outcomes: dict, povm_outcomes) -> tuple:
    """Outcome strings: instrument outcomes then terminating one, ';'-joined."""
    parts = [instrument_outcomes[lab] for lab in circuit.layers if lab in instrument_outcomes]
    parts.append(tuple(povm_outcomes))
    return tuple(OUTCOME_SEP.join(p) for p in itertools.product(*parts))


def spam_matrices(target, fiducials: FiducialSet):
    """Effect rows ``A`` (meas fiducial x outcome) and state columns ``B``.

    ``A`` has one row per ``(meas fiducial k, outcome e)`` pair in that order,
    ``B`` one column per prep fiducial.
    """
    from .simulate import propagate

    B = np.column_stack([propagate(target, f, target.rho) for f in fiducials.preps])
    rows = []
    for f in fiducials.meas:
        Mf = _circuit_matrix(target, f)
        for e in target.outcomes:
            rows.append(target.povm[e] @ Mf)
    return np.array(rows), B


def _circuit_matrix(gs, circuit: Circuit):
    n = gs.dim * gs.dim
    M = np.eye(n)
    for lab in circuit.layers:
        if lab not in gs.gates:
            raise ValidationError(f"fiducial uses non-gate label {lab!r}")
        M = gs.gates[lab] @ M
    return M


def check_completeness(target, fiducials: FiducialSet, rtol: float = 1e-8) -> None:
    A, B = spam_matrices(target, fiducials)
    n = target.dim * target.dim
    for name, mat in (("measurement fiducial matrix A", A), ("preparation fiducial matrix B", B)):
        s = np.linalg.svd(mat, compute_uv=False)
        if len(s) < n or s[n - 1] <= rtol * s[0]:
            raise InformationalCompletenessError(
                f"{name} has rank < {n}; fiducials are not informationally complete"
            )


def build_design(
    gate_labels,
    instrument_labels=("Q",),
    fiducials: FiducialSet | None = None,
    target=None,
    povm_outcomes=("0", "1"),
    instrument_outcomes: dict | None = None,
) -> ExperimentDesign:
    """QILGST design: null, gate and instrument fiducial sandwiches.

    Circuits with identical label sequences are merged, so a circuit such as
    ``Gx:Gx`` counts once even though it is both a null sandwich and a
    ``Gx`` sandwich.  ``design.categories`` records every category a circuit
    was generated by; :func:`category_counts` reports the unmerged tallies.
    Fiducial-only circuits (needed for the SPAM estimates) are appended when
    the empty fiducial is absent.
    """
    gate_labels = tuple(gate_labels)
    instrument_labels = tuple(instrument_labels)
    if not gate_labels:
        raise ValidationError("at least one gate label is required")
    fiducials = fiducials or default_fiducials()
    if target is not None:
        povm_outcomes = tuple(target.outcomes)
        instrument_outcomes = {
            k: tuple(str(i) for i in range(q.m)) for k, q in target.instruments.items()
        }
        check_completeness(target, fiducials)
    instrument_outcomes = dict(instrument_outcomes or {})
    for lab in instrument_labels:
        if lab in gate_labels:
            raise ValidationError(f"label {lab!r} is both a gate and an instrument")
        instrument_outcomes.setdefault(lab, ("0", "1"))

    groups = [("null", [p + m for p in fiducials.preps for m in fiducials.meas])]
    for lab in gate_labels + instrument_labels:
        germ = Circuit((lab,))
        groups.append((lab, [p + germ + m for p in fiducials.preps for m in fiducials.meas]))
    groups.append(("spam", list(fiducials.preps) + list(fiducials.meas)))

    circuits = []
    categories: dict = {}
    for cat, members in groups:
        for c in members:
            if c.id not in categories:
                categories[c.id] = []
                circuits.append(c)
            if cat not in categories[c.id]:
                categories[c.id].append(cat)
    instr = {k: instrument_outcomes[k] for k in instrument_labels}
    outcomes = {c.id: outcome_alphabet(c, instr, povm_outcomes) for c in circuits}
    return ExperimentDesign(
        circuits=tuple(circuits),
        outcomes=outcomes,
        fiducials=fiducials,
        gate_labels=gate_labels,
        instrument_labels=instrument_labels,
        categories=categories,
    )


def category_counts(design: ExperimentDesign) -> dict:
    """Distinct circuits per generating category, before cross-category merging."""
    out: dict = {}
    for cats in design.categories.values():
        for cat in cats:
            if cat != "spam":
                out[cat] = out.get(cat, 0) + 1
    return out
