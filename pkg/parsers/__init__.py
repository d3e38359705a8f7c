"""
Input parsers: experiment configs and eigenvalue files
"""
from .config_parser import parse_config, load_config, ExperimentConfig
from .spectrum_parser import parse_spectrum

__all__ = ['parse_config', 'load_config', 'ExperimentConfig', 'parse_spectrum']
