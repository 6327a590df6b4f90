#!/usr/bin/env python3
"""
Setup script for renyi-portfolio.
"""

from setuptools import setup

# Use pyproject.toml for configuration
setup()
