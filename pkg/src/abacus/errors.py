"""Exception types shared across the package."""


class AbacusError(Exception):
    pass


class ConfigError(AbacusError, ValueError):
    """Invalid configuration. ``path`` names the offending field (JSON-style)."""

    def __init__(self, path, message):
        self.path = path
        self.message = message
        super().__init__(f"config error at {path}: {message}" if path else f"config error: {message}")


class DecodeError(AbacusError, ValueError):
    """Malformed binary input; ``offset`` is the byte offset of the problem."""

    def __init__(self, message, offset):
        self.offset = offset
        super().__init__(f"{message} at offset {offset}")


class EncodeError(AbacusError, ValueError):
    def __init__(self, message, index):
        self.index = index
        super().__init__(f"record {index}: {message}")


class AddressFault(AbacusError):
    pass


class DeviceClosed(AbacusError):
    pass
