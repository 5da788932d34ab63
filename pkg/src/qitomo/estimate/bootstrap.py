"""Parametric bootstrap error bars.

Datasets are resampled from a fitted gate set, each is re-estimated with
lgst -> mle -> gauge optimization, and twice the sample standard deviation
of every requested scalar is reported.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from ..errors import QitomoError, ValidationError
from ..simulate import exact_dataset, simulate_design, subseed
from .gauge import gauge_optimize
from .lgst import lgst
from .mle import MleOptions, mle_fit

MIN_REPLICAS = 20


@dataclass
class BootstrapResult:
    values: dict  # scalar evaluated on the input gate set
    intervals: dict  # 2 x sample standard deviation
    samples: dict
    failed: list = field(default_factory=list)  # (replica index, message)

    def to_dict(self) -> dict:
        return {
            "values": self.values,
            "intervals": self.intervals,
            "replicas": len(next(iter(self.samples.values()), [])),
            "failed": [{"replica": i, "error": msg} for i, msg in self.failed],
        }


def fit_chain(dataset, design, target, fiducials=None, mle: bool = True,
              options: MleOptions | None = None, weights=None):
    """lgst, optional mle, then gauge optimization against ``target``."""
    est = lgst(dataset, design, fiducials, target)
    if mle:
        est = mle_fit(dataset, design, est, options)
    return gauge_optimize(est, target, weights)


def bootstrap_errorbars(
    gateset,
    design,
    N: int | None,
    replicas: int,
    seed: int,
    scalar_fns: Mapping[str, Callable],
    target=None,
    fiducials=None,
    mle: bool = True,
    options: MleOptions | None = None,
) -> BootstrapResult:
    """2-sigma intervals of ``scalar_fns`` over ``replicas`` resampled fits.

    ``N=None`` uses exact probabilities for every replica (all intervals 0
    for a self-consistent model).  A replica whose fit raises is dropped
    and listed in ``failed``.
    """
    if replicas < MIN_REPLICAS:
        raise ValidationError(f"bootstrap needs at least {MIN_REPLICAS} replicas, got {replicas}")
    if not scalar_fns:
        raise ValidationError("no scalars requested")
    target = target or gateset
    samples = {k: [] for k in scalar_fns}
    failed = []
    for r in range(replicas):
        try:
            if N is None:
                ds = exact_dataset(gateset, design)
            else:
                ds = simulate_design(gateset, design, N, subseed(seed, f"bootstrap:{r}"))
            fit = fit_chain(ds, design, target, fiducials, mle, options)
            vals = {k: float(fn(fit)) for k, fn in scalar_fns.items()}
        except (QitomoError, np.linalg.LinAlgError, ValueError) as exc:
            failed.append((r, f"{type(exc).__name__}: {exc}"))
            continue
        for k, v in vals.items():
            samples[k].append(v)
    kept = replicas - len(failed)
    if kept < 2:
        raise ValidationError(f"only {kept} bootstrap replicas succeeded")
    intervals = {k: float(2.0 * np.std(v, ddof=1)) for k, v in samples.items()}
    values = {k: float(fn(gateset)) for k, fn in scalar_fns.items()}
    return BootstrapResult(values=values, intervals=intervals, samples=samples, failed=failed)
