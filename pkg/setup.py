"""Build script: compiles the optional Cython kernel when Cython is available.

The package works without the extension (a numpy fallback is selected at
import time); building it just makes trace synthesis several times faster.
"""

from setuptools import Extension, setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "rydeit._chi_fast",
                ["src/rydeit/_chi_fast.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
