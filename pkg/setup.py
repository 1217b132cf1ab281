# Copyright 2025 The sgd_stoptime Authors

from setuptools import setup

setup()
