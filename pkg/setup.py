from setuptools import find_packages, setup

setup(
    name="sill-koopman",
    version="0.1.0",
    description="Koopman generator approximation with state-inclusive logistic lifting",
    packages=find_packages(exclude=("tests", "demos", "tools", "examples", "examples.*")),
    python_requires=">=3.8",
    install_requires=[
        "python-dotenv>=1.0.0",
        "tqdm>=4.65.0",
        "numpy>=1.21.0,<2.0.0",
        "scipy>=1.9.0",
        "pandas>=1.5.0",
    ],
    extras_require={"test": ["pytest>=7.0.0"]},
    entry_points={"console_scripts": ["sill-koopman=koopman_sill.cli:main"]},
)
