"""Build script: compiles the optional C kernel extension.

The package is fully functional without the extension (a NumPy fallback is
selected at import time), so a failed Cython build only costs speed.
"""

import sys

from setuptools import setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [
            Extension(
                "spcelab._kernels",
                ["src/spcelab/_kernels.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )
except Exception as exc:  # pragma: no cover - depends on the build host
    sys.stderr.write(
        "spcelab: skipping C kernel build (%s); the NumPy backend will be used\n" % exc
    )

setup(ext_modules=ext_modules)
