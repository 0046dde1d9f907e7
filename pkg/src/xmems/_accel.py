"""Numba availability probe and runtime switch for the accelerated kernels.

Every hot kernel in :mod:`xmems._kernels` has a pure-numpy twin, so the
package works identically (only slower) without numba.  Set the environment
variable ``XMEMS_NO_NUMBA=1`` to force the numpy path; the benchmark script
flips the switch at runtime to compare both.
"""

import os

try:
    import numba  # noqa: F401

    NUMBA_AVAILABLE = True
except ImportError:  # pragma: no cover - depends on the install
    NUMBA_AVAILABLE = False

_env_disabled = os.environ.get("XMEMS_NO_NUMBA", "").strip() not in ("", "0")
_enabled = NUMBA_AVAILABLE and not _env_disabled


def use_numba() -> bool:
    """True when the jit-compiled kernels should be dispatched."""
    return _enabled


def set_use_numba(flag: bool) -> bool:
    """Override the kernel dispatch at runtime. Returns the previous value."""
    global _enabled
    previous = _enabled
    _enabled = bool(flag) and NUMBA_AVAILABLE
    return previous
