"""Pulse-level simulator for baseband flux-controlled transmons under an always-on shared drive."""

__version__ = "0.1.0"
