"""Exception types raised across the package."""


class MachianError(Exception):
    """Base class for all package errors."""


class DegenerateInertia(MachianError):
    """The intrinsic inertia tensor has no non-null direction."""


class SingularSeparation(MachianError):
    """Two bodies came closer than the potential's separation floor."""


class StepRejected(MachianError):
    """An integration step produced non-finite state components."""


class InsufficientSamples(MachianError):
    """A finite-difference stencil needs more trajectory samples."""


class SolverDiverged(MachianError):
    """The iterative linear solver hit its iteration cap."""


class PacketTouchesWall(MachianError):
    """A wave packet is not supported far enough from the hard walls."""


class NormDriftWarning(UserWarning):
    """Per-step norm drift of a propagated wavefunction exceeded its bound."""


class ConfigError(MachianError):
    """Base class for scenario configuration errors."""


class ParseError(ConfigError):
    """The configuration file could not be read or parsed."""


class SchemaError(ConfigError):
    """The configuration violates the scenario schema.

    ``violations`` holds ``(key_path, message)`` pairs, one per problem found.
    """

    def __init__(self, violations):
        self.violations = list(violations)
        lines = [f"{path or '<root>'}: {msg}" for path, msg in self.violations]
        super().__init__("; ".join(lines))
