from .diamond import diamond_norm_blocks, diamond_oracle, half_diamond_distance
from .measurement import (
    InstrumentReport,
    ReadoutFidelity,
    instrument_report,
    readout_fidelity,
)
from .report import build_report, report_scalars
from .sdp import LMIResult, solve_lmi
from .stats import ModelViolation, circuit_tvds, max_tvd, model_violation, n_sigma_from, tvd

__all__ = [
    "InstrumentReport",
    "LMIResult",
    "ModelViolation",
    "ReadoutFidelity",
    "build_report",
    "circuit_tvds",
    "diamond_norm_blocks",
    "diamond_oracle",
    "half_diamond_distance",
    "instrument_report",
    "max_tvd",
    "model_violation",
    "n_sigma_from",
    "readout_fidelity",
    "report_scalars",
    "solve_lmi",
    "tvd",
]
