"""Biometric-free classroom attendance: RFID scans cross-checked against
chair weight sensing, driven by a deterministic classroom simulator."""

__version__ = "0.1.0"
