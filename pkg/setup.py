import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

ext_modules = []
if cythonize is not None:
    ext = Extension(
        "scalevo._native",
        sources=["src/scalevo/_native.pyx"],
        include_dirs=[np.get_include()],
        extra_compile_args=["-O3"],
    )
    ext_modules = cythonize([ext], language_level="3")

setup(ext_modules=ext_modules)
