"""Kernel backend selection: compiled extension when importable, pure python
otherwise. Set NETRMAB_PURE=1 to force the fallback."""

from __future__ import annotations

import os

from . import _pykernels

HAVE_COMPILED = False
greta_step_flat = None
whittle_batch = _pykernels.whittle_batch

if os.environ.get("NETRMAB_PURE", "0") != "1":
    try:
        from . import _ckernels  # type: ignore[attr-defined]

        whittle_batch = _ckernels.whittle_batch
        greta_step_flat = _ckernels.greta_step_flat
        HAVE_COMPILED = True
    except ImportError:
        pass


def backend_name() -> str:
    return "compiled" if HAVE_COMPILED else "pure"
