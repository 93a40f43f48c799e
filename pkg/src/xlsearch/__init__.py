"""Cross-lingual multi-keyword ranked search over PCTD-encrypted data."""

__version__ = "0.1.0"
