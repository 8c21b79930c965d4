from setuptools import setup, find_packages

setup(
    name='iscat',
    version='0.1.0',
    packages=find_packages(exclude=(
        'benchmark',
        'tests',
        'tests.*',
        '*.egg-info',
    )),
    description='Physics-guided learning for 2D TM inverse scattering, with classical baselines',
    python_requires='>=3.8',
    install_requires=[
        'einops',
        'ml-collections',
        'numpy',
        'scipy>=1.12',
        'torch>=1.13',
        'tqdm',
        'Pillow',
    ],
    extras_require={'test': ['pytest']},
    entry_points={'console_scripts': ['iscat=iscat.cli:main']},
)
