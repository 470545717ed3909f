"""Builds the optional compiled Earley kernel.

    pip install -e . --no-build-isolation

If Cython or a C++ compiler is missing the package still installs and the
pure-Python kernel is used.
"""
import os

from setuptools import setup

ext_modules = []
if not os.environ.get("ARTDIRECTOR_NO_EXT"):
    try:
        import numpy
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [Extension(
                "artdirector.grammar._earley_ext",
                ["src/artdirector/grammar/_earley_ext.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                extra_compile_args=["-O3", "-std=c++17"],
                language="c++",
            )],
            compiler_directives={"language_level": 3},
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
