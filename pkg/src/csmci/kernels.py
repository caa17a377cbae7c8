"""Backend selection for the Gibbs-sweep kernels.

Prefers the compiled extension; falls back to the pure-Python twin when the
extension is not built. Set CSMCI_PURE_PYTHON=1 to force the fallback.
"""

from __future__ import annotations

import os

from . import _kernels_py

try:
    from . import _kernels as _compiled
except ImportError:
    _compiled = None

_forced = os.environ.get("CSMCI_PURE_PYTHON", "").lower() not in ("", "0", "false")
_active = _kernels_py if (_compiled is None or _forced) else _compiled

#: Name of the kernel backend in use: "cython" or "python".
BACKEND: str = "python" if _active is _kernels_py else "cython"

#: Whether the compiled extension could be imported at all.
HAVE_COMPILED: bool = _compiled is not None

run_sweeps_binary = _active.run_sweeps_binary
run_sweeps_binary_ordered = _active.run_sweeps_binary_ordered
run_chain_binary = _active.run_chain_binary
advance_bank_binary = _active.advance_bank_binary


def get_backend(name: str):
    """Kernel module by name ("cython" or "python"); for tests and benchmarks."""
    if name == "python":
        return _kernels_py
    if name == "cython":
        if _compiled is None:
            raise ImportError("compiled kernels are not available; build with pip install -e .")
        return _compiled
    raise ValueError(f"unknown kernel backend {name!r}")
