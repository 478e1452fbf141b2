"""Build script for the optional compiled voting kernels.

The package works without the extension (a numpy fallback is selected at
import time), so the build degrades gracefully when Cython is unavailable.
"""

from setuptools import Extension, setup

try:
    import numpy as np
    from Cython.Build import cythonize
except ImportError:
    ext_modules = []
else:
    ext_modules = cythonize(
        [
            Extension(
                "primfit.kernels._voting",
                ["src/primfit/kernels/_voting.pyx"],
                include_dirs=[np.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )

setup(ext_modules=ext_modules)
