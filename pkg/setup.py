"""Build the optional compiled kernels.

If Cython or a C compiler is unavailable the package still installs and runs
on the pure-Python kernels.
"""
import os

from setuptools import Extension, setup

extensions = []
if os.environ.get("LPRNN_NO_EXT", "") != "1":
    try:
        import numpy
        from Cython.Build import cythonize

        extensions = cythonize(
            [Extension("lprnn._ckernels", ["src/lprnn/_ckernels.pyx"],
                       include_dirs=[numpy.get_include()],
                       define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                       extra_compile_args=["-O3"])],
            language_level="3",
        )
    except ImportError:
        extensions = []

setup(ext_modules=extensions)
