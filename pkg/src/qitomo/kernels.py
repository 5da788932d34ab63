"""Kernel selection.

The compiled extension is used when it was built; otherwise (or when
``QITOMO_PURE_PYTHON=1``) the NumPy implementation is used.  ``BACKEND``
names the active one.
"""
import os

from . import _kernels_py

BACKEND = "python"
forward = _kernels_py.forward
backward = _kernels_py.backward

if os.environ.get("QITOMO_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels
    except ImportError:  # extension not built
        pass
    else:
        BACKEND = "cython"
        forward = _ckernels.forward
        backward = _ckernels.backward
