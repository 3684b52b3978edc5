"""Rotators: a position plus a direction, with the Lagrangian

    L = m v^2/2 + a2 m l^2 ndot^2/2 - a1 m l c |ndot| (1 + n.v/c) + (e/c) A.v - e Phi.

The family is well behaved unless a2 = a1**2, where the velocity Hessian is
singular and the frequency |ndot|(t) is left undetermined.
"""
from .errors import *  # noqa: F401,F403
from .model import (ChartState, FieldConfig, FieldKind, RotatorParams, RotatorState,
                    from_chart, is_degenerate, params_from_shape, to_chart)
from .dynamics import (GaugeFrequency, IntegratorConfig, ResidualReport, Trajectory,
                       accelerations, integrate, path_distance, verify_solution)

__version__ = "0.1.0"

__all__ = [
    "ChartState", "FieldConfig", "FieldKind", "RotatorParams", "RotatorState", "from_chart",
    "is_degenerate", "params_from_shape", "to_chart", "GaugeFrequency", "IntegratorConfig",
    "ResidualReport", "Trajectory", "accelerations", "integrate", "path_distance",
    "verify_solution",
]
