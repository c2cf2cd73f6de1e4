"""Backend dispatch for the hot schedule-evaluation kernels.

The numba backend is used when importable; set EDASCHED_NO_NUMBA=1 (before
first import) to force the pure-numpy fallback. `BACKEND` reports which
path is active. benchmarks/bench_kernels.py compares the two.
"""
from __future__ import annotations

import os

DISABLE_ENV = "EDASCHED_NO_NUMBA"


def _numba_disabled() -> bool:
    return os.environ.get(DISABLE_ENV, "").strip().lower() not in ("", "0", "false")


BACKEND = "numpy"
if not _numba_disabled():
    try:
        from . import _kernels_numba as _impl  # noqa: F401
        BACKEND = "numba"
    except ImportError:
        BACKEND = "numpy"

if BACKEND == "numba":
    from ._kernels_numba import (
        completion_times_for_perms,
        lateness_for_perms,
        lateness_matrix,
        min_lateness_for_deliveries,
    )
else:
    from ._kernels_numpy import (
        completion_times_for_perms,
        lateness_for_perms,
        lateness_matrix,
        min_lateness_for_deliveries,
    )

__all__ = [
    "BACKEND",
    "DISABLE_ENV",
    "completion_times_for_perms",
    "lateness_for_perms",
    "lateness_matrix",
    "min_lateness_for_deliveries",
]
