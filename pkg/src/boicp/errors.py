"""Exception types raised by boicp."""


class BoIcpError(Exception):
    """Base class for all package errors."""


class DegeneratePoseError(BoIcpError, ValueError):
    """Euler extraction requested at (or too close to) gimbal lock."""


class NoOverlapError(BoIcpError):
    """No source point found a reference neighbour within the allowed distance."""


class DegenerateGeometryError(BoIcpError):
    """Too few or collinear correspondences to solve for a rigid transform."""


class NumericalError(BoIcpError, ArithmeticError):
    """Cholesky factorisation failed even after the jitter ladder."""


class RegistrationFailedError(BoIcpError):
    """Every objective evaluation of a registration run failed.

    The partial ``history`` is attached so callers can inspect what was tried.
    """

    def __init__(self, message, history=()):
        super().__init__(message)
        self.history = list(history)


class ParseError(BoIcpError, ValueError):
    """Malformed cloud or pose file.

    Exactly one of ``offset`` (byte offset, binary/headers) or ``line``
    (1-based line number, text rows) is usually set.
    """

    def __init__(self, message, path=None, offset=None, line=None):
        where = []
        if path is not None:
            where.append(str(path))
        if line is not None:
            where.append(f"line {line}")
        if offset is not None:
            where.append(f"byte {offset}")
        full = f"{': '.join([', '.join(where), message]) if where else message}"
        super().__init__(full)
        self.path = path
        self.offset = offset
        self.line = line
