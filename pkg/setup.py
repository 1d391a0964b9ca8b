"""Build script for the optional compiled kernels.

The package is fully functional without the extension; every compiled
routine has a pure-numpy twin in sepkit.kernels selected at import time.
If Cython or a C compiler is unavailable the build silently degrades to
the pure backend.
"""

from setuptools import setup

ext_modules = []
try:
    import numpy as np
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [
            Extension(
                "sepkit.kernels._native",
                ["src/sepkit/kernels/_native.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
