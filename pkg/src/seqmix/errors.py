"""Exception hierarchy shared by all seqmix modules."""


class SeqmixError(Exception):
    """Base class for errors raised by seqmix."""


class InputError(SeqmixError, ValueError):
    """A sequence or parameter is outside its declared domain."""


class DegenerateConditioningError(SeqmixError):
    """Conditioning on a prefix that has probability zero under every component."""


class CapacityError(SeqmixError):
    """An exhaustive computation would exceed its configured size cap."""

    def __init__(self, message: str, cap: int):
        super().__init__(f"{message} (cap = {cap})")
        self.cap = cap


class ContractError(SeqmixError):
    """A numeric contract (bound, partition property, audit inequality) failed."""


class ConfigError(SeqmixError):
    """An experiment or model-class document is malformed."""
