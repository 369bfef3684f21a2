#!/usr/bin/env python

from setuptools import find_packages, setup

from tkindex import __version__


long_description = """
tkindex is a workbench for checking the index theory of twisted circle fibrations
numerically and exactly. It computes Čech-level Dixmier-Douady classes of decomposable
twists, the primitive line bundle of a circle fibration, twisted de Rham cohomology,
idempotent analytic indices of fiberwise operator families, their Chern characters,
the semiclassical index and the Todd · ch coefficients behind the Riemann-Roch check.

Every computation is reachable through the `tkindex` management command, which runs a
named pipeline on a JSON scenario config and writes a versioned JSON report.
"""

setup(
    name="tkindex",
    version=__version__,
    description="Cross-checked computations for index theorems of twisted circle fibrations.",
    long_description=long_description,
    long_description_content_type="text/markdown",
    url="",
    packages=find_packages(),
    include_package_data=True,
    license="BSD",
    classifiers=[
        "Development Status :: 2 - Pre-Alpha",
        "Intended Audience :: Science/Research",
        "License :: OSI Approved :: BSD License",
        "Operating System :: OS Independent",
        "Programming Language :: Python",
        "Programming Language :: Python :: 3",
        "Programming Language :: Python :: 3.8",
        "Programming Language :: Python :: 3.9",
        "Programming Language :: Python :: 3.10",
        "Topic :: Scientific/Engineering :: Mathematics",
        "Framework :: Django",
        "Framework :: Django :: 3.2",
        "Framework :: Django :: 4.0",
    ],
    install_requires=[
        "Django>=3.2,<4.1",
        "numpy>=1.21",
        "scipy>=1.7",
        "sympy>=1.9",
    ],
    extras_require={
        "testing": [
            "coverage",
        ],
        "docs": ["pydoc-markdown==4.6.3"],
    },
    entry_points={
        "console_scripts": ["tkindex = tkindex.cli:main"],
    },
    zip_safe=False,
)
