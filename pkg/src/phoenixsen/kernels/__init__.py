"""Graph kernels with a compiled fast path and a pure-Python fallback.

Import-time selection: the compiled extension is used when present unless
``PHOENIXSEN_PURE=1`` forces the fallback. ``IMPLEMENTATION`` names the
active variant so callers and benchmarks can report which one ran.
"""
from __future__ import annotations

import os

from . import pure as _pure

if os.environ.get("PHOENIXSEN_PURE") == "1":
    _impl = _pure
else:
    try:
        from . import _graphcore as _impl  # type: ignore[attr-defined]
    except ImportError:
        _impl = _pure

IMPLEMENTATION: str = _impl.IMPLEMENTATION
shortest_paths = _impl.shortest_paths
spanning_tree = _impl.spanning_tree
components = _impl.components

__all__ = ["IMPLEMENTATION", "shortest_paths", "spanning_tree", "components", "pure"]
pure = _pure
