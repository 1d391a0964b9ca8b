"""Hot numeric kernels with a compiled core and a pure-numpy fallback.

The compiled extension (Cython) is preferred when importable; set
``SEPKIT_PURE_PYTHON=1`` to force the fallback. ``backend_name()`` reports
which implementation is live; both expose the same three entry points and
the test suite asserts their numerical parity.
"""

import os

import numpy as np

from . import _pure

_FORCE_PURE = os.environ.get("SEPKIT_PURE_PYTHON", "0") not in ("", "0")

_compiled = None
if not _FORCE_PURE:
    try:
        from . import _native as _compiled
    except ImportError:
        _compiled = None

_BACKEND = _compiled if _compiled is not None else _pure
_BACKEND_NAME = "compiled" if _compiled is not None else "pure"


def backend_name() -> str:
    return _BACKEND_NAME


def available_backends() -> dict:
    out = {"pure": _pure}
    if _compiled is not None:
        out["compiled"] = _compiled
    return out


def depthwise_conv1d_forward(x, k):
    x = np.ascontiguousarray(x)
    k = np.ascontiguousarray(k, dtype=x.dtype)
    return _BACKEND.depthwise_conv1d_forward(x, k)


def depthwise_conv1d_backward(x, k, gy):
    x = np.ascontiguousarray(x)
    k = np.ascontiguousarray(k, dtype=x.dtype)
    gy = np.ascontiguousarray(gy, dtype=x.dtype)
    return _BACKEND.depthwise_conv1d_backward(x, k, gy)


def ctc_forward_backward(log_probs, ext_labels, blank):
    """CTC total-probability loss and gradient, always computed in float64."""
    lp = np.ascontiguousarray(log_probs, dtype=np.float64)
    lab = np.ascontiguousarray(ext_labels, dtype=np.int64)
    return _BACKEND.ctc_forward_backward(lp, lab, int(blank))
