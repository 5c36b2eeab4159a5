"""Exception hierarchy shared by every hesearch module."""


class HESearchError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(HESearchError, ValueError):
    """An argument lies outside the domain an operation is defined on."""


class KeyGenerationError(HESearchError):
    """Prime search or generator selection did not succeed."""


class MalformedCiphertextError(HESearchError, ValueError):
    """A ciphertext is not a valid element of Z*_{n^2} for the key."""


class InvariantViolationError(HESearchError):
    """A ciphertext shares a factor with n; continuing would leak the key."""


class ConfigurationError(HESearchError, ValueError):
    """Parameters are inconsistent with each other or with the key."""


class EncodingOverflowError(ConfigurationError):
    """Encoded values would leave the unambiguous half of Z_n.

    ``index`` names the offending vector component or record when known.
    """

    def __init__(self, message: str, index: int | None = None):
        super().__init__(message)
        self.index = index


class TamperError(HESearchError):
    """Authenticated decryption failed (modified envelope or wrong key)."""


class PayloadFormatError(HESearchError, ValueError):
    """A serialized payload or wire frame is truncated or inconsistent."""


class ProtocolError(HESearchError):
    """A message arrived out of order or a transcript deviates from its scheme."""
