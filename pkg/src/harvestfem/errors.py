"""Exception hierarchy shared by the solver, harness and CLI."""


class HarvestFemError(Exception):
    """Base class for all package errors."""


class ConfigurationError(HarvestFemError, ValueError):
    """Invalid mesh, space, problem or run configuration."""


class SolverError(HarvestFemError, RuntimeError):
    """A per-species linear solve failed."""

    def __init__(self, message, species=None, time=None):
        self.species = species
        self.time = time
        if species is not None or time is not None:
            message = f"{message} (species={species}, t={time})"
        super().__init__(message)


class DivergenceError(SolverError):
    """Non-finite values appeared in a computed field."""
