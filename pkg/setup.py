"""Builds the optional compiled conv kernels; the package works without them."""

from setuptools import setup

ext_modules = []
try:
    import numpy as np
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [Extension(
            "bagselect.kernels._convext",
            ["src/bagselect/kernels/_convext.pyx"],
            include_dirs=[np.get_include()],
            define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        )],
        language_level=3,
    )
except Exception as exc:  # pragma: no cover - falls back to numpy kernels
    print(f"skipping compiled kernels: {exc}")

setup(ext_modules=ext_modules)
