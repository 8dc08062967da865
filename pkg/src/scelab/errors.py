"""Exception types shared across the package."""


class InvalidArgument(ValueError):
    """A parameter violates an operation's precondition."""


class DegenerateInput(ValueError):
    """The input is valid in type but yields a degenerate result (e.g. a zero wavefunction)."""


class SupportError(ZeroDivisionError):
    """A plan carries mass where its marginal vanishes, so a required quotient is undefined."""
