"""Kernel dispatch: compiled extension when built, pure numpy otherwise.

Set MOBMAN_PURE_KERNELS=1 to force the pure implementations (used by the
parity tests and the benchmark).
"""

import os

from . import pure

if os.environ.get("MOBMAN_PURE_KERNELS") == "1":
    _impl = pure
    COMPILED = False
else:
    try:
        from . import _core as _impl  # type: ignore[no-redef]

        COMPILED = True
    except ImportError:
        _impl = pure
        COMPILED = False

quat_mul = _impl.quat_mul
quat_rotate = _impl.quat_rotate
quat_from_rotvec = _impl.quat_from_rotvec
rotvec_from_quat = _impl.rotvec_from_quat
segment_closest_points = _impl.segment_closest_points
