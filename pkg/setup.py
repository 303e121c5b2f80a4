"""Build the optional compiled Schur-complement kernel.

Without Cython or a C compiler the package still installs; the numpy
fallback in ``mompoly.sdp._kernels_py`` is then used at import time.
"""
from setuptools import setup

ext_modules = []
try:
    import numpy as np
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [Extension("mompoly.sdp._kernels", ["src/mompoly/sdp/_kernels.pyx"],
                   include_dirs=[np.get_include()],
                   define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                   extra_compile_args=["-O3"])],
        compiler_directives={"language_level": "3"},
    )
except ImportError:  # build without the extension
    pass

setup(ext_modules=ext_modules)
