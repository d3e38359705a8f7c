"""
Command-line interface for the Dissipative Chaos Toolbox
"""
from .cli import CLI, main

__all__ = ['CLI', 'main']
