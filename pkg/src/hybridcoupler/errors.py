"""Exception hierarchy shared by all modules.

Each exception carries a short ``code`` used in the error column of sweep
tables, so a failed grid point can be identified without parsing messages.
"""


class CouplerError(Exception):
    """Base class for all toolkit errors."""

    code = "error"


class InvalidParameters(CouplerError, ValueError):
    code = "invalid_parameters"


class ConfigError(CouplerError, ValueError):
    code = "config_error"


class FluxAtZeroJosephsonEnergy(CouplerError, ZeroDivisionError):
    code = "zero_josephson_energy"


class PoleProximity(CouplerError, ArithmeticError):
    code = "pole_proximity"


class BracketingFailure(CouplerError, RuntimeError):
    code = "bracketing_failure"


class DegenerateNormalization(CouplerError, ArithmeticError):
    code = "degenerate_normalization"


class OutOfDomain(CouplerError, ValueError):
    code = "out_of_domain"


class OrthogonalityViolation(CouplerError, ArithmeticError):
    code = "orthogonality_violation"


class JunctionDecoupledMode(CouplerError, ArithmeticError):
    code = "junction_decoupled_mode"


class SingularMatrix(CouplerError, ArithmeticError):
    code = "singular_matrix"


class ConvergenceFailure(CouplerError, RuntimeError):
    code = "convergence_failure"


class ResonantDivergence(CouplerError, ArithmeticError):
    code = "resonant_divergence"


class MissingLabel(CouplerError, KeyError):
    code = "missing_label"


class TrackingBreak(CouplerError, RuntimeError):
    """Successive eigenvector overlap fell below the tracking threshold.

    ``interval`` holds the pair of flux values bracketing the break.
    """

    code = "tracking_break"

    def __init__(self, message, interval=None):
        super().__init__(message)
        self.interval = interval
