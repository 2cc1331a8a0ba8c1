"""Kernel backend selection.

The compiled extension is used when it was built; otherwise the pure-Python
module is loaded. Set ``DTGO_BACKEND=python`` to force the fallback.
"""

from __future__ import annotations

import os

from . import _pykernels

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

BACKENDS = {"python": _pykernels}
if _ckernels is not None:
    BACKENDS["compiled"] = _ckernels

_requested = os.environ.get("DTGO_BACKEND", "").strip().lower()
if _requested and _requested not in BACKENDS:
    raise ImportError(f"DTGO_BACKEND={_requested!r} is not available; have {sorted(BACKENDS)}")
BACKEND = _requested or ("compiled" if _ckernels is not None else "python")
_impl = BACKENDS[BACKEND]

dict_gossip = _impl.dict_gossip
csr_mix = _impl.csr_mix


def get(name: str | None = None):
    """Return the kernel module for ``name`` (default: the active backend)."""
    return BACKENDS[name or BACKEND]
