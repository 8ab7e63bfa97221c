"""Build script: compiles the optional Cython plant kernel when a toolchain
is available. The package works without it via the pure-Python fallback."""

from setuptools import Extension, setup

ext_modules = []
try:
    from Cython.Build import cythonize

    # -ffp-contract=off: no FMA contraction, so the compiled kernel is
    # bit-identical to the pure-Python fallback.
    ext_modules = cythonize(
        [
            Extension(
                "wraphaptics._plant_core",
                ["src/wraphaptics/_plant_core.pyx"],
                extra_compile_args=["-O2", "-ffp-contract=off"],
                optional=True,
            )
        ],
        language_level=3,
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
