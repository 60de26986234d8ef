"""
Python setup file for the tsn-nds package
"""
from setuptools import setup, find_namespace_packages

setup(
    name="tsn-nds",
    version="1.0.0",
    packages=find_namespace_packages(include=["src", "src.*"]),
    include_package_data=True,
    python_requires=">=3.8",
    install_requires=[
        "fastapi[all]",
        "uvicorn",
        "sqlalchemy",
        "pydantic>=2",
        "python-dotenv",
        "numpy",
        "simpy",
        "tqdm",
    ],
    entry_points={
        "console_scripts": [
            "tsn-nds=src.cli.app:main",
            "tsn-nds-api=src.api.app:start",
        ],
    },
)
