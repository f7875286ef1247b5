"""Ground states, sharp constants and blow-up dynamics for NLS with a Hardy potential."""

__version__ = "0.1.0"
