#!/usr/bin/env python

from setuptools import setup

#To prepare a new release
#python setup.py sdist

setup(name='cavcoord',
    version='0.1.0',
    description='Signal-free intersection coordination of connected automated vehicles with priority-based re-sequencing',
    license='MIT',
    packages=['cavcoord'],
    package_data={'cavcoord': ['data/*.yaml']},
    long_description=open('README.md').read(),
    long_description_content_type='text/markdown',
    install_requires=['numpy','scipy','pandas','pyyaml'],
    python_requires='>=3.8',
    test_suite='tests',
    #Note: this will create local copy of executable scripts
    entry_points={'console_scripts': ['cav_coord = cavcoord.cav_coord:main', \
            'travel_stats = cavcoord.travel_stats:main']}
)
