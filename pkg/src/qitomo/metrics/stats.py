"""Goodness of fit: total variation distance and likelihood-ratio model violation."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from ..errors import ValidationError
from ..simulate import CircuitTable


def tvd(model_dist, empirical) -> float:
    """Half the L1 distance between two distributions.

    Accepts equal-length sequences or mappings keyed by outcome; outcomes
    absent from the empirical mapping count as zero, outcomes the model
    does not know are an error.
    """
    if isinstance(model_dist, Mapping) != isinstance(empirical, Mapping):
        raise ValidationError("cannot compare a mapping with a sequence")
    if isinstance(model_dist, Mapping):
        extra = set(empirical) - set(model_dist)
        if extra:
            raise ValidationError(f"outcome alphabets differ: {sorted(extra)}")
        p = np.array([model_dist[k] for k in model_dist], dtype=float)
        f = np.array([empirical.get(k, 0.0) for k in model_dist], dtype=float)
    else:
        p = np.asarray(model_dist, dtype=float)
        f = np.asarray(empirical, dtype=float)
        if p.shape != f.shape:
            raise ValidationError(f"outcome alphabets differ in size: {p.shape} vs {f.shape}")
    return float(0.5 * np.abs(p - f).sum())


def circuit_tvds(gateset, dataset, design, circuits=None, context_rules=None) -> dict:
    table = CircuitTable.from_design(design, gateset, context_rules, circuits)
    p = table.probs(gateset, context_rules)
    n = table.counts(dataset)
    tot = table.totals(n)
    out = {}
    for j, cid in enumerate(table.ids):
        a, b = table.offsets[j], table.offsets[j + 1]
        out[cid] = float(0.5 * np.abs(p[a:b] - n[a:b] / tot[j]).sum())
    return out


def max_tvd(gateset, dataset, design, circuit_subset=None, context_rules=None) -> float:
    """Largest per-circuit TVD; the default subset is the instrument circuits."""
    subset = circuit_subset if circuit_subset is not None else design.instrument_circuits()
    if not subset:
        raise ValidationError("empty circuit subset")
    return max(circuit_tvds(gateset, dataset, design, subset, context_rules).values())


@dataclass
class ModelViolation:
    lambda_llr: float
    k: int
    n_sigma: float
    n_outcomes: int  # independent outcomes, sum_c (|outcomes_c| - 1)
    n_params: int  # non-gauge parameters subtracted
    tvd: dict = field(default_factory=dict)
    max_tvd: float = 0.0

    def to_dict(self) -> dict:
        return {
            "lambda": self.lambda_llr,
            "k": self.k,
            "n_sigma": self.n_sigma,
            "independent_outcomes": self.n_outcomes,
            "nongauge_params": self.n_params,
            "tvd": self.tvd,
            "max_tvd": self.max_tvd,
        }


def n_sigma_from(lam: float, k: int) -> float:
    """(lambda - k) / sqrt(2k): deviation from the chi-squared mean in its std."""
    if k <= 0:
        raise ValidationError(f"non-positive degrees of freedom k={k}: model is over-parameterized")
    return float((lam - k) / np.sqrt(2.0 * k))


def nongauge_params(gateset) -> int:
    return gateset.num_params() - gateset.gauge_dim()


def model_violation(gateset, dataset, design, n_fit_params: int | None = None,
                    circuits=None, context_rules=None, tvd_subset=None,
                    floor: float = 1e-9) -> ModelViolation:
    """Log-likelihood-ratio test of ``gateset`` against the data.

    ``lambda = 2 sum n [log f - log p]`` with ``0 log 0 = 0`` and ``p``
    clamped at ``floor``.  ``k`` counts independent outcomes minus the
    model's non-gauge parameters: total TP-model parameters minus the
    ``d^2 (d^2 - 1)`` gauge directions.  ``n_fit_params`` overrides the
    subtraction, e.g. 0 for a model fixed before seeing the data.
    """
    circuits = circuits if circuits is not None else design.circuits
    table = CircuitTable.from_design(design, gateset, context_rules, circuits)
    p = table.probs(gateset, context_rules)
    n = table.counts(dataset)
    tot = table.totals(n)[table.cell_circuit]
    pos = n > 0
    lam = 2.0 * float(np.sum(n[pos] * (np.log(n[pos] / tot[pos])
                                        - np.log(np.clip(p[pos], floor, None)))))
    lam = max(lam, 0.0)
    n_out = int(np.sum(np.diff(table.offsets) - 1))
    npar = nongauge_params(gateset) if n_fit_params is None else int(n_fit_params)
    k = n_out - npar
    ns = n_sigma_from(lam, k)
    per = circuit_tvds(gateset, dataset, design, circuits, context_rules)
    subset = tvd_subset if tvd_subset is not None else design.instrument_circuits()
    ids = [c.id for c in subset] if subset else list(per)
    present = [per[c] for c in ids if c in per]
    return ModelViolation(lambda_llr=lam, k=k, n_sigma=ns, n_outcomes=n_out, n_params=npar,
                          tvd=per, max_tvd=max(present) if present else 0.0)
