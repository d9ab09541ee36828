"""Build script for the optional compiled gate-kernel extension.

The package works without the extension (a pure-numpy implementation of
the same kernels is selected at import time), so any failure to build it
should not block installation: run with PATCHQNET_SKIP_EXT=1 to force a
pure-Python install.
"""

import os

from setuptools import Extension, setup


def _extensions():
    if os.environ.get("PATCHQNET_SKIP_EXT"):
        return []
    if not os.path.exists("src/patchqnet/_kernels_cy.pyx"):
        return []
    try:
        import numpy
        from Cython.Build import cythonize
    except ImportError:
        return []
    ext = Extension(
        "patchqnet._kernels_cy",
        ["src/patchqnet/_kernels_cy.pyx"],
        include_dirs=[numpy.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
    return cythonize([ext], language_level=3)


setup(ext_modules=_extensions())
