from setuptools import setup, Extension

try:
    from Cython.Build import cythonize
    import numpy as np
except ImportError:  # build without the compiled core; numpy fallback is used
    ext_modules = []
else:
    ext_modules = cythonize(
        [
            Extension(
                "clusterlab._kernels",
                ["src/clusterlab/_kernels.pyx"],
                include_dirs=[np.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )

setup(ext_modules=ext_modules)
