"""Exception types shared across the package."""


class DomainError(ValueError):
    """A point lies outside the support of a density or model."""


class NotPositiveDefiniteError(DomainError):
    """A mass operator failed to factorize."""


class DivergenceError(RuntimeError):
    """A simulated trajectory left the support or blew up in energy."""


class DegenerateVarianceError(ValueError):
    """A sequence has zero variance, so autocorrelations are undefined."""


class ConfigError(ValueError):
    """An experiment configuration could not be parsed or validated."""
