"""Finite-alphabet toolkit for discrete memoryless multimessage multicast networks."""

__version__ = "0.1.0"
