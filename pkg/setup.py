from setuptools import setup

try:
    import numpy
    from Cython.Build import cythonize
    from setuptools import Extension

    ext = Extension(
        "semexplore._kernels._core",
        sources=["src/semexplore/_kernels/_core.pyx"],
        include_dirs=[numpy.get_include()],
        extra_compile_args=["-O3"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
    ext_modules = cythonize([ext], compiler_directives={"language_level": "3"})
except ImportError:
    # The package still works without the extension: _kernels falls back
    # to the pure NumPy implementation at import time.
    ext_modules = []

setup(ext_modules=ext_modules)
