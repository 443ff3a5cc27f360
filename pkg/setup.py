from setuptools import setup, find_packages

setup(
    name="kawlab",
    version="0.1.0",
    packages=find_packages(include=["kawlab", "kawlab.*"]),
    install_requires=[
        'click>=8.0.0',
        'pydantic>=2.0.0',
        'numpy>=1.22.0',
        'scipy>=1.8.0',
    ],
    entry_points={
        'console_scripts': [
            'kawlab = kawlab.main:cli',
        ],
    },
)
