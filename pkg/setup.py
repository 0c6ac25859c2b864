from setuptools import find_packages, setup

requirements = [
    "numpy>=1.16",
    "pandas>=1.0",
    "backends>=1.4.8",
    "plum-dispatch>=2.0",
    "wbml>=0.3.9",
    "PyYAML>=5.1",
]

setup(
    packages=find_packages(exclude=["docs", "tests", "experiments"]),
    python_requires=">=3.8",
    install_requires=requirements,
    include_package_data=True,
    entry_points={"console_scripts": ["ptmarket=ptmarket.cli:main"]},
)
