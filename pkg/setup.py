"""Build script for the optional compiled statevector kernels.

The package is fully functional without the extension: lpqc.backend falls
back to the NumPy implementation when ``lpqc._statevec`` is missing or when
LPQC_BACKEND=python is set.
"""
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

if cythonize is not None:
    ext_modules = cythonize(
        [
            Extension(
                "lpqc._statevec",
                ["src/lpqc/_statevec.pyx"],
                extra_compile_args=["-O3"],
                optional=True,
            )
        ],
        language_level=3,
    )
else:
    ext_modules = []

setup(ext_modules=ext_modules)
