class QSDCError(Exception):
    pass


class DomainError(QSDCError, ValueError):
    """Argument outside the mathematical domain of an operation."""


class CapabilityError(QSDCError, ValueError):
    """Request outside the supported envelope (e.g. no built-in MUB set)."""


class ConfigError(QSDCError, ValueError):
    pass


class ProtocolOrderError(QSDCError, RuntimeError):
    """A step touched a slot that an earlier step already consumed."""


class UnknownUserError(QSDCError, LookupError):
    pass
