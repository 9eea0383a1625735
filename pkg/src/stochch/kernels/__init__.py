"""Hot numeric kernels with a numba path and a pure-numpy fallback.

The backend is chosen once at import time. Set ``STOCHCH_NUMBA=0`` in the
environment to force the numpy implementations; numba is also skipped
silently when it cannot be imported.

Both backends stay importable as ``stochch.kernels.numpy_backend`` and
``stochch.kernels.numba_backend`` (the latter is ``None`` without numba) so
tests and benchmarks can compare them side by side.
"""

import os

from . import _numpy as numpy_backend

try:
    from . import _numba as numba_backend
except ImportError:  # pragma: no cover - numba is optional
    numba_backend = None


def _numba_requested():
    flag = os.environ.get("STOCHCH_NUMBA", "1").strip().lower()
    return flag not in ("0", "false", "no", "off")


if numba_backend is not None and _numba_requested():
    _impl = numba_backend
    BACKEND = "numba"
else:
    _impl = numpy_backend
    BACKEND = "numpy"

standard_normals = _impl.standard_normals
cubic_eval = _impl.cubic_eval
sublinear_product = _impl.sublinear_product

__all__ = [
    "BACKEND",
    "cubic_eval",
    "numba_backend",
    "numpy_backend",
    "standard_normals",
    "sublinear_product",
]
