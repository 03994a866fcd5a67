"""
Exception hierarchy for the Couette stability laboratory

Exit codes follow the command-line contract:
0 success, 1 numerical failure, 2 usage error, 3 inconclusive (resolution).
"""


class LabError(Exception):
    """Base class for every error raised by the laboratory"""

    exit_code = 1


class ConfigError(LabError, ValueError):
    """Invalid configuration or parameter outside its documented range"""

    exit_code = 2


class ShapeMismatch(LabError, ValueError):
    """Array length or shape does not match the grid"""

    exit_code = 2


class BoundaryViolation(LabError, ValueError):
    """Mode field does not vanish at y = ±1"""

    exit_code = 1


class NumericalFailure(LabError, ArithmeticError):
    """Singular solve, NaN in a trajectory, or infeasible calibration"""

    exit_code = 1


class InconclusiveResolution(LabError):
    """The configured resolution cannot decide the question asked"""

    exit_code = 3


class CFLViolation(InconclusiveResolution):
    """Time step exceeds the advective CFL bound"""


class MissingOperator(LabError, KeyError):
    """Singular operator requested from a cache that does not hold it"""

    exit_code = 1


def exit_code_for(error: BaseException) -> int:
    """Map an exception to the process exit code"""
    if isinstance(error, LabError):
        return error.exit_code
    return 1
