from typing import Optional


class EngineException(Exception):
    exit_status: int = 2
    default_message: str = "Engine error"

    def __init__(self, message: Optional[str] = None, data: Optional[dict] = None):
        super().__init__(message or self.default_message)
        self.message = message or self.default_message
        self.data = data

    def dict(self):
        return {
            "error": type(self).__name__,
            "message": self.message,
            "data": self.data,
            "exit_status": self.exit_status,
        }


# ---------- configuration / precondition errors (exit 2) ----------
class ConfigurationException(EngineException):
    exit_status: int = 2
    default_message = "Invalid configuration"


class AliasingException(ConfigurationException):
    default_message = "Hermite truncation too large for the grid"


class GridMismatchException(ConfigurationException):
    default_message = "Operands live on different grids"


class GridMarginException(ConfigurationException):
    default_message = "Grid has no room for the difference stencil"


class NonSmoothSymbolException(ConfigurationException):
    default_message = "Finite differences of the symbol are inconsistent"


class LambdaBandException(ConfigurationException):
    default_message = "Lambda outside the resolved band"


class EllipticityException(ConfigurationException):
    default_message = "Symbol is not elliptic on the sampled region"


# ---------- verdicts (exit 1) ----------
class VerdictFailure(EngineException):
    exit_status: int = 1
    default_message = "Verdict: fail"


# ---------- numerical instability (exit 3) ----------
class NumericalInstabilityException(EngineException):
    exit_status: int = 3
    default_message = "Numerical instability"


class TruncationException(NumericalInstabilityException):
    default_message = "Hermite truncation is not converged"


class TailDominanceException(NumericalInstabilityException):
    default_message = "Lambda integral is dominated by the band edge"


class SupportOverflowException(NumericalInstabilityException):
    default_message = "Shifted function leaves the grid"


class CalibrationException(NumericalInstabilityException):
    default_message = "Calibration spread too large"


class NonInjectiveSampleException(NumericalInstabilityException):
    default_message = "Operator output vanishes on a sample"
