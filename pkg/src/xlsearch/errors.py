"""Exception hierarchy shared by every layer of the package."""


class XLSearchError(Exception):
    """Base class. ``code`` is the short tag used in CLI error records."""

    code = "error"


class ParameterError(XLSearchError, ValueError):
    code = "corrupt-parameters"


class KeyMismatchError(XLSearchError, ValueError):
    code = "key-mismatch"


class DecryptionError(XLSearchError, ValueError):
    code = "decryption-failed"


class PlaintextRangeError(XLSearchError, ValueError):
    code = "plaintext-range"


class KeywordError(XLSearchError, ValueError):
    code = "bad-keyword"


class LexiconError(XLSearchError, ValueError):
    code = "lexicon"


class UnknownLanguageError(LexiconError):
    code = "unknown-language"


class QueryError(XLSearchError, ValueError):
    code = "bad-query"


class ProtocolError(XLSearchError, RuntimeError):
    """A two-party session failed: transport loss, malformed frame, refused step."""

    code = "protocol-failure"


class RevealRefused(ProtocolError):
    code = "reveal-refused"


class IntegrityError(XLSearchError, ValueError):
    code = "integrity"


class StoreError(XLSearchError, OSError):
    code = "store"
