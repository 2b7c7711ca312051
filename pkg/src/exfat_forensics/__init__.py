"""Read-only forensic analysis of exFAT volume images."""
__version__ = "0.1.0"
