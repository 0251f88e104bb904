"""SPDC pump-transfer imaging simulator."""

__version__ = "0.1.0"
