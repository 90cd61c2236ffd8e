"""Exception hierarchy shared by all laneavl modules."""


class LaneAvlError(Exception):
    pass


class InvalidArgument(LaneAvlError, ValueError):
    pass


class NoLockError(LaneAvlError):
    """No PRN/lag correlation peak cleared the lock threshold."""

    def __init__(self, message, peak=None):
        super().__init__(message)
        self.peak = peak


class EncodingError(LaneAvlError, ValueError):
    pass


class DecodingError(LaneAvlError, ValueError):
    pass


class CrcError(DecodingError):
    pass


class StaleEphemerisError(LaneAvlError):
    pass


class ExcludedSatelliteError(LaneAvlError):
    pass


class StaleCorrectionError(LaneAvlError):
    pass


class DegenerateGeometryError(LaneAvlError):
    pass


class NoSolutionError(LaneAvlError):
    def __init__(self, message, residual_km):
        super().__init__(message)
        self.residual_km = residual_km


class ConvergenceError(LaneAvlError):
    pass


class InvalidPolygonError(LaneAvlError, ValueError):
    pass


class SchemaError(LaneAvlError, ValueError):
    """File content does not match the expected document layout.

    ``path`` is a dotted field path (``lanes.3.lane_id``) and ``line`` the
    1-based source line when it is known.
    """

    def __init__(self, message, path="", line=None):
        where = path or "<document>"
        if line is not None:
            where = f"line {line}: {where}"
        super().__init__(f"{where}: {message}")
        self.path = path
        self.line = line


class ScenarioError(LaneAvlError):
    def __init__(self, diagnostics):
        lines = [str(d) for d in diagnostics]
        super().__init__("invalid scenario:\n  " + "\n  ".join(lines))
        self.diagnostics = list(diagnostics)
