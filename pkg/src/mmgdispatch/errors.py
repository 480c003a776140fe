"""Exception types shared across the package."""


class MmgError(Exception):
    """Base class for all mmgdispatch errors."""


class ParameterError(MmgError):
    """A parameter violates its documented invariants."""


class InfeasibleError(MmgError):
    """A scheduling or dispatch problem has no feasible solution.

    Carries optional context identifying where infeasibility occurred.
    """

    def __init__(self, message, hour=None, ev_id=None):
        super().__init__(message)
        self.hour = hour
        self.ev_id = ev_id


class SocBoundsError(MmgError):
    """A battery state-of-charge transition left the allowed band."""


class ValidationError(MmgError):
    """A case file failed validation.

    ``problems`` is a list of ``(field_path, message)`` pairs.
    """

    def __init__(self, problems):
        self.problems = list(problems)
        lines = "; ".join(f"{path}: {msg}" for path, msg in self.problems)
        super().__init__(f"invalid case file: {lines}")
