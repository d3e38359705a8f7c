"""
Core components for the Dissipative Chaos Toolbox
"""
from .linalg import ComplexOperator, PureState
from .models import LindbladModel, model_from_params
from .liouville import Spectrum, build_superoperator, spectrum

__all__ = [
    'ComplexOperator', 'PureState', 'LindbladModel', 'model_from_params',
    'Spectrum', 'build_superoperator', 'spectrum',
]
