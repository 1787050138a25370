import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

if cythonize is not None:
    extensions = cythonize(
        [
            Extension(
                "s2wb._kernels_c",
                ["src/s2wb/_kernels_c.pyx"],
                include_dirs=[np.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
    # a failed compile must not block the install: the package falls back to
    # the pure-NumPy kernels at import time
    for ext in extensions:
        ext.optional = True
else:
    extensions = []

setup(ext_modules=extensions)
