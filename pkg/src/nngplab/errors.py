"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid configuration or argument value.

    The message always names the offending key or parameter so command-line
    callers can report it verbatim.
    """


class DegenerateKernelError(ValueError):
    """A limit kernel entry is not strictly positive.

    Raised when the covariance recursion reaches K <= 0 with a nonconstant
    activation: the Gaussian limit is degenerate there, so distances to it
    and bounds on them are undefined.
    """
