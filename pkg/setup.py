"""Build script: compiles the packet-engine kernel when Cython is available.

Without Cython (or a C compiler) the package installs unchanged and falls back
to the pure-Python engine at import time.
"""
from setuptools import setup

ext_modules = []
try:
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [Extension("contract_lens.netsim._cengine", ["src/contract_lens/netsim/_cengine.pyx"])],
        compiler_directives={"language_level": "3"},
        quiet=True,
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
