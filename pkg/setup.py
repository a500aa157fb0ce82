"""Build script: compiles the optional Cython core.

The package is fully functional without the extension (bayesfilt.backend
falls back to the pure-NumPy implementations), so the build degrades
gracefully when Cython is unavailable.
"""

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    extensions = cythonize(
        [Extension("bayesfilt._core", ["src/bayesfilt/_core.pyx"])],
        language_level="3",
    )
except ImportError:
    extensions = []

setup(ext_modules=extensions)
