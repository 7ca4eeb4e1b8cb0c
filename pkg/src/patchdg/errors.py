"""Exception hierarchy shared by all patchdg modules."""


class PatchDGError(Exception):
    """Base class for all library errors."""


class InvalidInputError(PatchDGError, ValueError):
    """Arguments outside the documented domain of an operation."""


class GeometryError(PatchDGError):
    """Degenerate or non-simple geometry."""


class MeshError(PatchDGError):
    """Inconsistent mesh topology."""


class MeshParseError(MeshError):
    """Malformed mesh file.

    Parameters
    ----------
    message : str
        What went wrong.
    line : int or None
        1-based line number in the offending file.
    """

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class UnisolvenceError(PatchDGError):
    """The patch barycenters do not determine a degree-k polynomial."""

    def __init__(self, message, element=None, sigma_min=None):
        self.element = element
        self.sigma_min = sigma_min
        super().__init__(message)


class SolverError(PatchDGError):
    """Linear solve failed or produced an unacceptable residual."""


class PointLocationError(PatchDGError, LookupError):
    """A point could not be located in the mesh."""
