"""
kawlab common utilities: constants, models, errors and file formats.
"""

from .errors import (
    AcceptanceError,
    ArgumentError,
    ConfigError,
    ConvergenceError,
    KawlabError,
    SizeError,
    StageError,
    TrainingError,
    WitnessError,
)
from .report import Report

__all__ = [
    'KawlabError',
    'SizeError',
    'ArgumentError',
    'ConvergenceError',
    'TrainingError',
    'ConfigError',
    'StageError',
    'WitnessError',
    'AcceptanceError',
    'Report',
]
