from os import path

from setuptools import find_packages, setup

here = path.abspath(path.dirname(__file__))

# Get the long description from the README file
with open(path.join(here, "README.md")) as f:
    long_description = f.read()

setup(
    name="dptomo",
    version="0.1.0.dev0",
    description="Data-pattern quantum state tomography with coherent-state probes",
    long_description=long_description,
    long_description_content_type="text/markdown",
    classifiers=[
        "Development Status :: 3 - Alpha",
        "Intended Audience :: Science/Research",
        "Programming Language :: Python :: 3.8",
        "Topic :: Scientific/Engineering :: Physics",
    ],
    python_requires=">=3.8",
    packages=find_packages(exclude=["tests", "examples", "examples.*"]),
    tests_require=["pytest"],
    setup_requires=["pytest-runner"],
    install_requires=[
        "altair",
        "loguru",
        "numpy",
        "pandas>=1.1",
        "Pint",
        "PyYAML",
        "scipy",
        "terminaltables",
        "xxhash",
    ],
    entry_points={"console_scripts": ["tomo=dptomo.cli:main"]},
)
