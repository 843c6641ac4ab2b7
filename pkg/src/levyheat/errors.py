"""Exception types shared across the library."""


class NumericsError(Exception):
    """A numerical guard failed (resolution, extent, convergence)."""


class ResolutionError(NumericsError):
    """The dual grid cannot resolve the requested kernel."""


class ExtentError(NumericsError):
    """Data falls outside the working spatial extent."""


class DivergenceError(NumericsError):
    """A spectral integral diverges where a finite value is required."""


class ConfigError(Exception):
    """Invalid or inconsistent experiment configuration."""


class SimulationError(Exception):
    """A simulation left its stability envelope."""
