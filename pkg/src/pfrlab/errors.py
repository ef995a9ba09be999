"""Exception types raised across pfrlab."""


class PfrlabError(Exception):
    """Base class for all library errors."""


class DimensionMismatch(PfrlabError, ValueError):
    pass


class EmptyInputError(PfrlabError, ValueError):
    pass


class CapExceeded(PfrlabError):
    """An exact enumeration would exceed its configured size cap."""

    def __init__(self, what, value, cap):
        super().__init__(f"{what}={value} exceeds cap {cap}")
        self.what = what
        self.value = value
        self.cap = cap


class BudgetExceeded(PfrlabError):
    pass


class IsoViolation(PfrlabError):
    """A fiber of the dense-model map met the set in two or more points."""

    def __init__(self, x, points):
        super().__init__(f"fiber over {x:#x} contains {len(points)} members")
        self.x = x
        self.points = points


class ModelFailure(PfrlabError):
    pass


class DensificationFailure(PfrlabError):
    pass


class AmbiguityError(PfrlabError):
    """Two heavy Fourier coefficients of one row are too close to call."""

    def __init__(self, row, candidates):
        super().__init__(f"row {row}: ambiguous heavy coefficients {candidates}")
        self.row = row
        self.candidates = candidates


class ParseError(PfrlabError, ValueError):
    def __init__(self, path, line, msg):
        super().__init__(f"{path}:{line}: {msg}")
        self.path = path
        self.line = line
