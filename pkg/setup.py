import os

from setuptools import Extension, setup

ext_modules = []
if os.environ.get("QBHOP_NO_EXTENSION", "") in ("", "0"):
    try:
        import numpy as np
        from Cython.Build import cythonize
    except ImportError:
        pass
    else:
        ext_modules = cythonize(
            [Extension("qbhop._kernels", ["src/qbhop/_kernels.pyx"], include_dirs=[np.get_include()])],
            language_level=3,
        )

setup(ext_modules=ext_modules)
