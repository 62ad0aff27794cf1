"""Build script for the optional compiled simulation core.

The package is fully functional without the extension; ``etpass.eventsim``
falls back to the pure-Python loop when ``etpass._core`` is unavailable.
``-ffp-contract=off`` keeps the C arithmetic bit-compatible with the
pure-Python loop (no fused multiply-add contraction).
"""

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    ext_modules = []
else:
    ext_modules = cythonize(
        [
            Extension(
                "etpass._core",
                ["src/etpass/_core.pyx"],
                extra_compile_args=["-O2", "-ffp-contract=off"],
            )
        ],
        compiler_directives={
            "language_level": 3,
            "boundscheck": False,
            "wraparound": False,
        },
    )

setup(ext_modules=ext_modules)
