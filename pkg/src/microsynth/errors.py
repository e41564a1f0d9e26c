"""Exception hierarchy shared by all modules.

Each class carries a short machine-greppable ``code`` used by the CLI.
"""


class MicrosynthError(Exception):
    code = "E_GENERIC"


class DomainError(MicrosynthError, ValueError):
    """A parameter lies outside the domain of the map it addresses."""

    code = "E_DOMAIN"


class ArgumentError(MicrosynthError, ValueError):
    code = "E_ARGUMENT"


class GeometryError(MicrosynthError):
    """Degenerate or invalid geometry (folded Jacobian, axis crossing...)."""

    code = "E_GEOMETRY"


class CompositionError(MicrosynthError):
    code = "E_COMPOSITION"


class ParameterValidationError(MicrosynthError, ValueError):
    code = "E_PARAMETER"


class NumericalError(MicrosynthError, ArithmeticError):
    code = "E_NUMERIC"


class ConfigError(MicrosynthError, ValueError):
    code = "E_CONFIG"
