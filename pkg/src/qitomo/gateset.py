"""The gate set container: preparation, gates, instruments, terminating POVM."""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Mapping

import numpy as np

from . import ptm
from .errors import ValidationError
from .ptm import QuantumInstrument


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class GateSet:
    rho: np.ndarray
    gates: Mapping[str, np.ndarray]
    instruments: Mapping[str, QuantumInstrument] = field(default_factory=dict)
    povm: Mapping[str, np.ndarray] = field(default_factory=dict)
    dim: int = 2

    def __post_init__(self):
        object.__setattr__(self, "rho", _frozen(self.rho))
        object.__setattr__(
            self, "gates", {k: _frozen(v) for k, v in self.gates.items()}
        )
        object.__setattr__(
            self,
            "instruments",
            {
                k: v if isinstance(v, QuantumInstrument) else QuantumInstrument(v)
                for k, v in self.instruments.items()
            },
        )
        object.__setattr__(
            self, "povm", {str(k): _frozen(v) for k, v in self.povm.items()}
        )
        n = self.dim * self.dim
        if self.rho.shape != (n,):
            raise ValidationError(f"rho must have length {n}")
        for k, g in self.gates.items():
            if g.shape != (n, n):
                raise ValidationError(f"gate {k} must be {n}x{n}")
        for k, q in self.instruments.items():
            if q.branches[0].shape != (n, n):
                raise ValidationError(f"instrument {k} branches must be {n}x{n}")
        for k, e in self.povm.items():
            if e.shape != (n,):
                raise ValidationError(f"effect {k} must have length {n}")
        overlap = set(self.gates) & set(self.instruments)
        if overlap:
            raise ValidationError(f"labels used twice: {sorted(overlap)}")

    # -- inspection -----------------------------------------------------------

    @property
    def outcomes(self) -> list[str]:
        return list(self.povm)

    @property
    def labels(self) -> list[str]:
        return list(self.gates) + list(self.instruments)

    def has_label(self, label: str) -> bool:
        return label in self.gates or label in self.instruments

    def check(self, tol: float = ptm.TP_TOL) -> list[str]:
        """Return a list of invariant violations (empty when the set is valid)."""
        problems = []
        ident = ptm.identity_effect(self.dim)
        if self.povm:
            s = np.sum(list(self.povm.values()), axis=0)
            if np.abs(s - ident).max() > tol:
                problems.append("POVM effects do not sum to the identity")
        for k, g in self.gates.items():
            if not ptm.is_tp(g, tol):
                problems.append(f"gate {k} is not trace preserving")
        for k, q in self.instruments.items():
            if not q.is_tp(tol):
                problems.append(f"instrument {k} does not sum to a TP map")
        return problems

    def num_params(self) -> int:
        """Free real parameters of the TP-constrained model.

        State: d^2-1 (trace fixed).  POVM with K effects: (K-1) d^2 (the last
        effect is the identity complement).  TP gates: d^2 (d^2-1).  TP
        instruments with m branches: m d^2 * d^2 - d^2.
        """
        n = self.dim * self.dim
        total = n - 1
        total += max(len(self.povm) - 1, 0) * n
        total += len(self.gates) * n * (n - 1)
        total += sum(q.m * n * n - n for q in self.instruments.values())
        return total

    def gauge_dim(self) -> int:
        n = self.dim * self.dim
        return n * (n - 1)

    # -- transformations ------------------------------------------------------

    def with_ops(self, **kw) -> "GateSet":
        return replace(self, **kw)

    def transform(self, M) -> "GateSet":
        """Similarity transform: ops -> M X M^-1, rho -> M rho, E -> E M^-1."""
        M = np.asarray(M, dtype=float)
        Mi = np.linalg.inv(M)
        return GateSet(
            rho=M @ self.rho,
            gates={k: M @ g @ Mi for k, g in self.gates.items()},
            instruments={
                k: q.transform(lambda b: M @ b @ Mi)
                for k, q in self.instruments.items()
            },
            povm={k: e @ Mi for k, e in self.povm.items()},
            dim=self.dim,
        )

    def distances(self, other: "GateSet") -> dict[str, float]:
        """Frobenius distance per operation (instrument branches as ``Q[i]``)."""
        out = {"rho": float(np.linalg.norm(self.rho - other.rho))}
        for k, e in self.povm.items():
            out[f"E{k}"] = float(np.linalg.norm(e - other.povm[k]))
        for k, g in self.gates.items():
            out[k] = float(np.linalg.norm(g - other.gates[k]))
        for k, q in self.instruments.items():
            for i, b in enumerate(q.branches):
                out[f"{k}[{i}]"] = float(
                    np.linalg.norm(b - other.instruments[k].branches[i])
                )
        return out

    # -- serialization --------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "rho": self.rho.tolist(),
            "povm": {k: e.tolist() for k, e in self.povm.items()},
            "gates": {k: g.tolist() for k, g in self.gates.items()},
            "instruments": {
                k: [b.tolist() for b in q.branches]
                for k, q in self.instruments.items()
            },
        }

    @classmethod
    def from_dict(cls, data: dict, scales: Mapping[str, float] | None = None):
        """Build from the JSON layout.

        ``scales`` multiplies individual objects after loading, keyed by
        ``"rho"``, ``"povm"`` (all effects) or ``"E<outcome>"``.  Published
        tables often print vectors without their ``1/sqrt(d)`` prefactor.
        """
        scales = dict(scales or {})
        try:
            dim = int(data.get("dim", 2))
            rho = np.asarray(data["rho"], dtype=float) * scales.get("rho", 1.0)
            povm = {}
            for k, e in data.get("povm", {}).items():
                s = scales.get(f"E{k}", scales.get("povm", 1.0))
                povm[k] = np.asarray(e, dtype=float) * s
            gates = {k: np.asarray(g, dtype=float) for k, g in data["gates"].items()}
            instruments = {
                k: QuantumInstrument([np.asarray(b, dtype=float) for b in q])
                for k, q in data.get("instruments", {}).items()
            }
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"malformed gate set: {exc}") from exc
        return cls(rho=rho, gates=gates, instruments=instruments, povm=povm, dim=dim)

    def save(self, path, **extra) -> None:
        d = self.to_dict()
        d.update(extra)
        with open(path, "w") as fh:
            json.dump(d, fh, indent=2)

    @classmethod
    def load(cls, path, scales=None) -> "GateSet":
        with open(path) as fh:
            return cls.from_dict(json.load(fh), scales)
