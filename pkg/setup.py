from setuptools import Extension, setup

ext_modules = [
    Extension(
        "rsnnsim.accel._cycle",
        sources=["src/rsnnsim/accel/_cycle.pyx"],
    )
]

if __name__ == "__main__":
    from Cython.Build import cythonize

    setup(
        ext_modules=cythonize(ext_modules, language_level="3"),
    )
