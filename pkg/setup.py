from setuptools import setup, find_packages

# import from hidim package triggers imports of numerical modules unavailable during setup install
# from hidim import __version__ as version
version = '1.0.0'

description = 'Monte Carlo experiments on the limits of Gaussian classification with few samples in high dimension'
requires = [
    'pytest>=5.4.2',
    'pytest-cov>=2.8.1',
    'coveralls>=2.0.0',
    'pyyaml>=5.3.1',
    'numpy>=1.20.0',
    'scipy>=1.6.0',
    'matplotlib>=3.3.0',
]

with open("README.md", 'r') as f:
    long_description = f.read()

setup(
    name='Hidim',
    version=version,
    description=description,
    long_description=long_description,
    long_description_content_type='text/markdown',
    license='MIT License',
    python_requires='>=3.8.0',
    install_requires=requires,
    packages=find_packages(exclude=['tests']),
    package_data={
        # Install settings.yaml for loading default settings
        'hidim': ["config/*.yaml"]
    },
    include_package_data=True,
    entry_points={'console_scripts': ['hidim=hidim.__main__:main']}
)
