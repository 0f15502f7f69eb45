import os

from setuptools import Extension, setup

# The compiled kernels are optional: the package falls back to numpy when
# Cython or a C compiler is missing.
ext_modules = []
if os.environ.get("EDGEHEALTH_NO_EXT", "") in ("", "0"):
    try:
        import numpy as np
        from Cython.Build import cythonize
    except ImportError:
        pass
    else:
        ext_modules = cythonize(
            [
                Extension(
                    "edgehealth._kernels",
                    ["src/edgehealth/_kernels.pyx"],
                    include_dirs=[np.get_include()],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                    extra_compile_args=["-O3", "-ffp-contract=off"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)
