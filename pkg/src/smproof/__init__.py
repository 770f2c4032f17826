"""Rigorous numerics for the Shimizu-Morioka homoclinic butterfly and its separatrix value."""

__version__ = "0.1.0"
