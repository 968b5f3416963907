"""Hot grid kernels: compiled extension when built, pure NumPy otherwise.

Set SEMEXPLORE_PURE=1 to force the pure implementation (used by the
benchmark and the equivalence tests).
"""
from __future__ import annotations

import os

from . import pure

if os.environ.get("SEMEXPLORE_PURE", "0") == "1":
    _impl = pure
    COMPILED = False
else:
    try:
        from . import _core as _impl  # type: ignore[no-redef]

        COMPILED = True
    except ImportError:
        _impl = pure
        COMPILED = False

raycast_voxels = _impl.raycast_voxels
integrate_frame = _impl.integrate_frame
dijkstra_field = _impl.dijkstra_field

EXIT_MAX_RANGE = pure.EXIT_MAX_RANGE
EXIT_HIT = pure.EXIT_HIT
EXIT_OUT_OF_BOUNDS = pure.EXIT_OUT_OF_BOUNDS
