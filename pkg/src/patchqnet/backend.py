"""Kernel backend selection.

The compiled Cython kernels are preferred when the extension built;
otherwise the numpy implementation is used.  PATCHQNET_BACKEND=py|cy
forces a choice (forcing `cy` without the extension is an error, so a
missing build never silently degrades a benchmark).
"""

import os

from . import _kernels_py


def _select():
    choice = os.environ.get("PATCHQNET_BACKEND", "").strip().lower()
    if choice in ("py", "python", "numpy"):
        return _kernels_py
    try:
        from . import _kernels_cy
    except ImportError:
        if choice in ("cy", "cython", "ext"):
            raise RuntimeError(
                "PATCHQNET_BACKEND=cy requested but the compiled extension "
                "is not available; reinstall without PATCHQNET_SKIP_EXT"
            )
        return _kernels_py
    return _kernels_cy


kernels = _select()

BACKEND = kernels.NAME


def available_backends():
    """Name -> kernel module for every importable backend."""
    out = {_kernels_py.NAME: _kernels_py}
    try:
        from . import _kernels_cy
        out[_kernels_cy.NAME] = _kernels_cy
    except ImportError:
        pass
    return out
