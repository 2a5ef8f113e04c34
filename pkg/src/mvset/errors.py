"""Exception hierarchy shared by the library and the CLI.

The ``exit_code`` attribute is what the ``mvset`` command returns when the
corresponding failure reaches the top level.
"""


class MvsetError(Exception):
    exit_code = 1


class ConfigError(MvsetError):
    """Bad configuration file: unknown key, unparsable value, missing section."""

    exit_code = 2


class GeometryError(MvsetError):
    """Grid/margin violations: pole too close to the boundary, box too small."""

    exit_code = 3


class PreconditionError(MvsetError):
    """An operation was called outside its contract (bad radii, non-FB point...)."""

    exit_code = 4


class SolverError(MvsetError):
    """Iteration cap exceeded or residual target missed."""

    exit_code = 5
