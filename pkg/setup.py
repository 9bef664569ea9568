"""Build script for the optional compiled kernel extension.

The package is fully functional without it (a numpy fallback is selected
at import); building just makes the training hot loop faster:

    python setup.py build_ext --inplace
"""

from setuptools import setup

extensions = []
try:
    import numpy
    from Cython.Build import cythonize
    from setuptools import Extension

    extensions = cythonize(
        [
            Extension(
                "jitminer.model._fastnet",
                ["src/jitminer/model/_fastnet.pyx"],
                include_dirs=[numpy.get_include()],
                # Built in place for this machine; no fast-math so the
                # kernels keep IEEE semantics (parity with the fallback).
                extra_compile_args=["-O3", "-march=native"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    print("Cython or numpy unavailable at build time; "
          "skipping the compiled kernels (numpy fallback will be used).")

setup(ext_modules=extensions)
