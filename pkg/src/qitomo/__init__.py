"""Gate set tomography for gate sets that contain mid-circuit measurements."""
from .errors import (
    InformationalCompletenessError,
    NumericalError,
    QitomoError,
    ValidationError,
)
from .gateset import GateSet
from .ptm import QuantumInstrument

__version__ = "0.1.0"

__all__ = [
    "GateSet",
    "QuantumInstrument",
    "QitomoError",
    "ValidationError",
    "InformationalCompletenessError",
    "NumericalError",
]
