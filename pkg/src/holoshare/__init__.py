"""Shared-control toolkit for a holonomic wheelchair: 2D simulation,
policy training, reactive baseline, evaluation, and teleoperation service.
"""

__version__ = "0.1.0"
