"""Build script: compiles the optional orbit-sum kernel when Cython and a C
compiler are available; the package falls back to the numpy engine otherwise.
"""

from setuptools import Extension, setup

ext_modules = []
try:
    import numpy as np
    from Cython.Build import cythonize

    ext = Extension(
        "paracurve._fastsum",
        ["src/paracurve/_fastsum.pyx"],
        include_dirs=[np.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
    ext_modules = cythonize([ext], compiler_directives={"language_level": "3"})
except Exception as exc:  # noqa: BLE001 - any build-chain problem means "pure python"
    print(f"paracurve: building without the compiled kernel ({exc})")

setup(ext_modules=ext_modules)
