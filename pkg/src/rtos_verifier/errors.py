class VerifierError(Exception):
    """Base class for everything the verifier raises on purpose."""


class ConfigurationError(VerifierError):
    """Bad config file, unknown property, unknown proposition or mutation."""


class LtlSyntaxError(ConfigurationError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} at position {position}")
        self.position = position


class InternalLogicError(VerifierError):
    """The model or the search broke one of its own preconditions."""


class ModelAssertionError(VerifierError):
    """A model assertion failed while a statement executed.

    Never escapes apply_transition: it is turned into a failed AssertionOutcome.
    """

    def __init__(self, check: str, detail: str = ""):
        super().__init__(f"{check}: {detail}" if detail else check)
        self.check = check
        self.detail = detail


class IntegrityError(VerifierError):
    """A recorded path does not replay against the model."""


class ResourceError(VerifierError):
    """The visited store ran past its configured capacity."""
