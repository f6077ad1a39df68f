"""Typed errors. Each category maps to a CLI exit code."""

from __future__ import annotations


class EpcylError(Exception):
    """Base class for all package errors."""

    exit_code = 1

    def __init__(self, message: str, **info):
        super().__init__(message)
        self.info = info


class ConfigError(EpcylError):
    """Invalid scenario, parameters or input files."""

    exit_code = 2


class ParameterError(ConfigError, ValueError):
    """Parameter outside its admissible domain."""


class ShapeError(ConfigError, ValueError):
    """Arrays sampled on mismatched grids."""


class RegimeError(EpcylError):
    """Data or iterate outside the supersonic small-perturbation regime."""

    exit_code = 3


class SonicBreakdownError(RegimeError):
    """Background density left the admissible band."""


class HyperbolicityLossError(RegimeError):
    """c^2 - U_1^2 is no longer negative."""


class OutOfRegimeError(RegimeError):
    """A literal regime inequality failed (flux band, radius band, sigma guard)."""


class CompatibilityError(RegimeError):
    """Boundary compatibility condition violated."""


class DegenerateFluxError(RegimeError):
    """Entrance flux function is not strictly increasing."""


class ConvergenceError(EpcylError):
    """An iteration failed to converge."""

    exit_code = 4


class WeakCouplingError(ConvergenceError):
    """Hyperbolic/elliptic sweeps did not contract."""


class NonContractionError(ConvergenceError):
    """Picard or outer iteration diverged."""


class NumericalError(EpcylError):
    """Numerical failure (vacuum, singular solve)."""

    exit_code = 5


class VacuumError(NumericalError):
    """Phi - |u|^2/2 <= 0 somewhere."""


class SolverError(NumericalError):
    """Linear solve did not reach its residual target."""
