from setuptools import setup, find_packages

setup(
    name="mfkit",
    version="0.1.0",
    description="Multifractality and volatility analysis toolkit for high-frequency price series.",
    packages=find_packages(exclude=("examples", "examples.*")),
    install_requires=[
        "numpy>=1.22",
        "scipy>=1.9",
        "pandas>=1.5",
        "statsmodels>=0.13",
        "joblib>=1.2",
        "numba>=0.56",
        "jsonschema>=4.0",
        "pydantic>=2.0",
    ],
    extras_require={"test": ["pytest>=7.0"]},
    entry_points={"console_scripts": ["mfkit=mfkit.cli:main"]},
    python_requires=">=3.9",
)
