import os

from setuptools import Extension, setup

ext_modules = []
if not os.environ.get("OPCRED_NO_EXTENSION"):
    try:
        from Cython.Build import cythonize
    except ImportError:
        pass
    else:
        ext_modules = cythonize(
            [Extension("opcred.kernels._ckernels", ["src/opcred/kernels/_ckernels.pyx"],
                       extra_compile_args=["-O3"])],
            language_level=3,
        )

setup(ext_modules=ext_modules)
