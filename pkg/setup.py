from setuptools import setup

import os

# Read the version without importing the package
version = {}
with open(os.path.join(os.path.dirname(__file__), "ndecon", "__init__.py")) as fp:
    for line in fp:
        if line.startswith("__version__"):
            exec(line, version)
            break

setup(
    name="ndecon",
    version=version["__version__"],
    description="n-dimensional convolution and nonnegative deconvolution",
    packages=["ndecon"],
    python_requires=">=3.8",
    install_requires=["numpy", "h5py"],
    extras_require={
        "test": ["scipy"],
        "docs": ["sphinx"],
    },
    entry_points={"console_scripts": ["ndecon = ndecon.cli:main"]},
)
