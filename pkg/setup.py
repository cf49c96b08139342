from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "echosim._kernels._core",
                ["src/echosim/_kernels/_core.pyx"],
                # -O3 for auto-vectorization; deliberately no -ffast-math or
                # -mfma, results must stay bit-identical to the fallback.
                extra_compile_args=["-O3"],
                optional=True,
            )
        ],
        language_level=3,
    )
except ImportError:
    # No Cython: install pure-Python only, kernels fall back at import.
    ext_modules = []

setup(ext_modules=ext_modules)
