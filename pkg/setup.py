from setuptools import Extension, setup

import numpy
from Cython.Build import cythonize

ext_modules = cythonize(
    [
        Extension(
            "neighborseed._fastcore",
            ["src/neighborseed/_fastcore.pyx"],
            include_dirs=[numpy.get_include()],
            extra_compile_args=["-O3"],
            define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        )
    ],
    language_level=3,
)

setup(ext_modules=ext_modules)
