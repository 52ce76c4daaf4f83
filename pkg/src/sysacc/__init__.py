"""Compiler and cycle-approximate simulator for a systolic-array inference accelerator."""

__version__ = "0.1.0"
