"""Gain-kernel backend selection.

The compiled extension (``mfcf._kernels._native``) is used when it was
built; otherwise the numpy fallback is selected.  Set ``MFCF_BACKEND`` to
``native`` or ``python`` to force a backend (``native`` raises if the
extension is missing).
"""

import os

_requested = os.environ.get("MFCF_BACKEND", "auto")

if _requested == "python":
    from . import _numpy as _impl
elif _requested in ("auto", "native"):
    try:
        from . import _native as _impl  # type: ignore[attr-defined]
    except ImportError:
        if _requested == "native":
            raise
        from . import _numpy as _impl
else:
    raise ValueError(
        f"MFCF_BACKEND={_requested!r}: expected auto, native or python")

BACKEND = _impl.NAME
similarity_gains = _impl.similarity_gains
gaussian_gains = _impl.gaussian_gains


def backend_name() -> str:
    return BACKEND
