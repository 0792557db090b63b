"""Deep ReLU NTK on pairs of smooth closed spherical curves.

Evaluates the closed-form kernel profile of deep ReLU networks, measures
the curve-pair geometry that sets classification difficulty, constructs
small-norm near-solutions of the kernel integral equation (directly and
through a Fourier/Neumann route), simulates kernel-regime gradient
descent, and checks finite-width concentration against the closed form.
"""

__version__ = "0.1.0"

from .errors import (CurventkError, DomainError, ConfigurationError,
                     NumericError, ResolutionError, DegenerateCurveError,
                     ConstructionError)
from .kernel import (KernelParams, SkeletonTable, angle_evolution,
                     iterated_angle_evolution, hat_angle_evolution, xi,
                     hat_xi, skeleton, skeleton_dc, hat_skeleton,
                     skeleton_derivative, xi_derivative, tabulate_skeleton,
                     ntk, angle_between)
