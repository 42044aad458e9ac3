# src/shared/errors.py
from typing import Optional, TYPE_CHECKING

if TYPE_CHECKING:
    from .models import Certificate


class PolarModError(Exception):
    """Base error; ``code`` is the stable identifier written into reports."""

    code = "error"
    exit_code = 2

    def __init__(self, message: str = ""):
        super().__init__(message or self.code)
        self.message = message or self.code


class ProfileMismatch(PolarModError):
    code = "profile_mismatch"


class ShapeMismatch(PolarModError):
    code = "shape_mismatch"


class NotHermitian(PolarModError):
    code = "not_hermitian"


class NegativeSpectrum(PolarModError):
    code = "negative_spectrum"


class DefectSingular(PolarModError):
    """1 - F*F is not invertible: the transform encodes no bounded matrix."""

    code = "defect_singular"


class NotContractive(PolarModError):
    code = "not_contractive"


class EigenNotConverged(PolarModError):
    code = "eigen_not_converged"


class NotSquare(PolarModError):
    code = "not_square"


class InvalidPolynomial(PolarModError):
    code = "invalid_polynomial"


class DomainMismatch(PolarModError):
    code = "domain_mismatch"


class ZeroPolynomial(PolarModError):
    code = "zero_polynomial"


class UnsupportedIrrationalRoot(PolarModError):
    code = "unsupported_irrational_root"


class NotRealValued(PolarModError):
    code = "not_real_valued"


class DiscontinuousFunction(PolarModError):
    code = "discontinuous_function"


class NotComplemented(PolarModError):
    """Condition (ii) fails; carries the witness point."""

    code = "not_complemented"

    def __init__(self, certificate: "Certificate", message: str = ""):
        super().__init__(message or f"range closure not complemented at {certificate.point}")
        self.certificate = certificate


class ParseError(PolarModError):
    code = "parse_error"

    def __init__(self, message: str, location: Optional[str] = None):
        super().__init__(f"{location}: {message}" if location else message)
        self.location = location


class SchemaError(PolarModError):
    code = "schema_error"

    def __init__(self, message: str, location: Optional[str] = None):
        super().__init__(f"{location}: {message}" if location else message)
        self.location = location


class UnsupportedCommandForBackend(PolarModError):
    code = "unsupported_command_for_backend"
