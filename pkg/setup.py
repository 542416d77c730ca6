#!/usr/bin/env python
from setuptools import setup

setup(name='ec3py',
      packages=['ec3py', 'ec3py.tests'],
      use_scm_version=True,
      setup_requires=['setuptools_scm', 'setuptools_scm_git_archive'],
      description='Multi-player bandits with collision-dependent rewards: '
                  'the EC3 algorithm, collision-channel codes and an '
                  'experiment harness',
      install_requires=["numpy>=1.17", "scipy", "astropy", "matplotlib",
                        "scikit-commpy"],
      extras_require={"test": ["pytest"]},
      entry_points={"console_scripts": ["ec3py=ec3py.cli:main"]},
      classifiers=[
          'Intended Audience :: Science/Research',
          'Operating System :: OS Independent',
          'Programming Language :: Python :: 3'
      ],
      )
