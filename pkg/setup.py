"""Builds the optional compiled kernel extension.

The package works without it (pure-numpy fallback selected at import);
any Cython or compiler failure downgrades to a pure install.
"""

from setuptools import setup

ext_modules = []
try:
    import numpy as np
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [
            Extension(
                "mobman._kernels._core",
                ["src/mobman/_kernels/_core.pyx"],
                include_dirs=[np.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                # bit-for-bit parity with the pure kernels: no FMA contraction,
                # and no sin+cos -> sincos fusion (glibc sincos rounds
                # differently from standalone cos by up to 1 ulp)
                extra_compile_args=[
                    "-ffp-contract=off",
                    "-fno-fast-math",
                    "-fno-builtin-sin",
                    "-fno-builtin-cos",
                    "-fno-builtin-sincos",
                ],
            )
        ],
        language_level=3,
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
