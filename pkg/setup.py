import numpy as np
from Cython.Build import cythonize
from setuptools import Extension, setup

ext = Extension(
    "degenfuse._kdtree",
    ["src/degenfuse/_kdtree.pyx"],
    include_dirs=[np.get_include()],
    extra_compile_args=["-O3"],
    language="c++",
)

setup(ext_modules=cythonize([ext], language_level=3))
