#!/usr/bin/env python

from setuptools import setup

setup(name='labeldenoise',
      version='0.1.0',
      description='Denoising noisy video labels by ensemble distillation and penultimate stacking',
      keywords=['multi-label', 'noisy labels', 'distillation', 'stacking', 'video classification'],
      packages=["labeldenoise", "labeldenoise.data", "labeldenoise.diff", "labeldenoise.models",
                "labeldenoise.stream"],
      python_requires='>=3.8',
      install_requires=['numpy>=1.20', 'scipy>=1.6'],
      extras_require={'tests': ['pytest', 'scikit-learn']},
      entry_points={'console_scripts': ['labeldenoise=labeldenoise.cli:main_exit']},
      classifiers=[],
)
