"""Argumentation graphs of threaded conversations and classifiers that pick
out users whose contributions the community consistently rewards."""

__version__ = "0.1.0"
