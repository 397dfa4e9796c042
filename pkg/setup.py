# setup for package tools
# python3 setup.py sdist bdist_wheel
from setuptools import setup, find_packages

setup(
    name='moregan',
    version='0.1.0',
    description='Depth-guided semi-supervised removal of rain streaks and rainy haze',
    author='moregan team',
    url='',
    packages=find_packages(exclude=['tests', 'tests.*']),
    install_requires=[
        'numpy',
        'scipy',
        'tqdm',
        'mmh3',
        'cachetools',
        'torch',
        'torchvision',
        'Pillow',
        'pandas',
        'matplotlib',
    ],
    entry_points={
        'console_scripts': [
            'moregan = moregan.cli:main',
        ],
    },
    python_requires='>=3.8'
)
