from setuptools import setup
import pathlib

from rarts import __version__ as version

# The directory containing this file
HERE = pathlib.Path(__file__).parent
# The text of the README file
README = (HERE / "README.md").read_text()

setup(
    name='rarts',
    version=version,
    description='Relaxed architecture search: RARTS and DARTS solvers for bilevel problems',
    long_description=README,
    long_description_content_type="text/markdown",
    keywords='neural-architecture-search, bilevel-optimization, darts, rarts, autodiff',
    license="MIT",
    python_requires=">=3.8.0",
    packages=['rarts', 'rarts.examples'],
    install_requires=['numpy>=1.19'],
    entry_points={
        'console_scripts': ['rarts=rarts.cli:main'],
    },
)
