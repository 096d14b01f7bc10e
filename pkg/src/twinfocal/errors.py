"""Exception hierarchy shared by all twinfocal modules.

The command line front end maps these onto process exit codes, so the
split between configuration problems and numerical problems matters:
``ConfigError`` means the inputs were wrong, ``NumericalError`` means the
inputs were fine but the computation could not be completed reliably.
"""


class ConfigError(ValueError):
    """Invalid or inconsistent user input (config file, flags, parameters)."""


class NumericalError(RuntimeError):
    """A numerical procedure failed to reach its stated tolerance."""


class QuadratureError(NumericalError):
    """Node doubling changed an integral by more than the allowed tolerance."""


class ScanRangeError(NumericalError):
    """A search range did not bracket the requested feature (e.g. half max)."""
