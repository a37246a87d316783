"""Kernel backend selection.

The compiled ``_ckernels`` extension is used when it was built; otherwise
the numpy implementation in ``_pykernels`` is used.  Set
``WBPLAN_PURE_PYTHON=1`` to force the fallback.
"""

import os

from wbplan import _pykernels as python_backend

compiled_backend = None
if os.environ.get("WBPLAN_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from wbplan import _ckernels as compiled_backend
    except ImportError:  # extension not built
        compiled_backend = None

_impl = compiled_backend if compiled_backend is not None else python_backend
BACKEND = "cython" if compiled_backend is not None else "python"

forward = _impl.forward
point_jacobian = _impl.point_jacobian
com_jacobian = _impl.com_jacobian
center_of_mass = _impl.center_of_mass
segment_segment_distance = _impl.segment_segment_distance
point_segment_distance = _impl.point_segment_distance
point_box_signed_distance = _impl.point_box_signed_distance
segment_box_distance = _impl.segment_box_distance
segment_box_penetration = _impl.segment_box_penetration
box_box_penetration = _impl.box_box_penetration
qp_active_set = _impl.qp_active_set
