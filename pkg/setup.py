import os
import re
from setuptools import setup, find_packages

# Get package version without importing the package
with open(os.path.join("topagg", "__init__.py"), "r") as f:
    content = f.read()
    version_match = re.search(r'^__version__\s*=\s*[\'"]([^\'"]*)[\'"]', content, re.M)
    if not version_match:
        raise RuntimeError("Unable to find version string.")
    version = version_match.group(1)

# Read README.md for the long description
with open("README.md", "r") as f:
    long_description = f.read()

setup(
    name="topagg",
    version=version,
    description="Differentially private top-k gradient compression, aggregation and privacy accounting",
    long_description=long_description,
    long_description_content_type="text/markdown",
    packages=find_packages(exclude=["tests", "examples"]),
    package_data={"topagg": ["templates/*"]},
    install_requires=[
        "numpy>=1.24",
        "scipy>=1.10",
        "scikit-learn>=1.3",
        "dp-accounting>=0.4,<0.5",
        "pyyaml>=6.0",
        "jinja2>=3.1",
    ],
    extras_require={
        "dev": [
            "black>=24.4.2",
            "mypy>=1.11.0",
            "types-PyYAML",
            "pytest==8.3.2",
            "pytest-cov",
        ],
    },
    entry_points={"console_scripts": ["topagg=topagg.cli:main"]},
    classifiers=[
        "Development Status :: 3 - Alpha",
        "Intended Audience :: Science/Research",
        "License :: OSI Approved :: MIT License",
        "Programming Language :: Python",
        "Programming Language :: Python :: 3",
        "Programming Language :: Python :: 3.9",
        "Programming Language :: Python :: 3.10",
        "Programming Language :: Python :: 3.11",
        "Programming Language :: Python :: 3.12",
        "Programming Language :: Python :: 3.13",
        "Topic :: Scientific/Engineering",
    ],
    python_requires=">=3.9",
)
