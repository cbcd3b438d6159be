from setuptools import Extension, setup

import numpy

try:
    from Cython.Build import cythonize
except ImportError:
    # The package still works without the compiled core: looptune.kernels
    # falls back to the pure-Python twin at import time.
    ext_modules = []
else:
    ext_modules = cythonize(
        [
            Extension(
                "looptune._fastloop",
                ["src/looptune/_fastloop.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
            )
        ],
        language_level=3,
    )

setup(ext_modules=ext_modules)
