"""Exception hierarchy. CLI exit codes hang off the class attribute."""


class LazySearchError(Exception):
    exit_code = 1


class ConfigurationError(LazySearchError, ValueError):
    """Missing or malformed inputs (priors, training worlds, configs)."""

    exit_code = 2


class ContractViolation(LazySearchError):
    """A caller or plug-in broke an interface contract."""

    exit_code = 3


class SizeGuardError(LazySearchError):
    """Instance too large for an exact (enumerative) routine."""

    exit_code = 4


class UnsupportedOperation(LazySearchError):
    exit_code = 2


class NoFeasiblePathError(LazySearchError):
    exit_code = 3


class IntegrityError(ContractViolation):
    """Trace or state does not agree with the world it claims to come from."""


class InconsistentOutcomeError(ContractViolation):
    """Observed outcomes rule out every hypothesis."""


class RealizabilityError(ContractViolation):
    """True world is outside the hypothesis support."""


class ModelInconsistencyError(ContractViolation):
    """Several decision regions survive but no test can separate them."""
