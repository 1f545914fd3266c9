"""Kernel backend selection.

The compiled extension ``spcelab._kernels`` is preferred when importable;
otherwise the NumPy twin ``spcelab._kernels_py`` is used.  Both expose the
same functions with the same uniform-consumption order, so simulated
outcome series do not depend on which backend ran them.

Set ``SPCELAB_BACKEND=python`` or ``SPCELAB_BACKEND=cython`` to force one
(forcing an unavailable backend raises at import).
"""

from __future__ import annotations

import os

from . import _kernels_py

try:
    from . import _kernels as _compiled
except ImportError:
    _compiled = None


def available_backends() -> dict:
    out = {"python": _kernels_py}
    if _compiled is not None:
        out["cython"] = _compiled
    return out


def _resolve():
    forced = os.environ.get("SPCELAB_BACKEND")
    if forced:
        mods = available_backends()
        if forced not in ("python", "cython"):
            raise ImportError(f"SPCELAB_BACKEND={forced!r}: expected 'python' or 'cython'")
        if forced not in mods:
            raise ImportError("SPCELAB_BACKEND=cython but the compiled kernels are not built")
        return mods[forced]
    return _compiled if _compiled is not None else _kernels_py


kernels = _resolve()


def backend_name() -> str:
    return kernels.NAME
