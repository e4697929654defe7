"""Base-station certificate scheme: construction, ledger delivery, signed SIB1
broadcast, multi-factor verification, and a desk-scale attack simulator."""

__version__ = "0.1.0"
