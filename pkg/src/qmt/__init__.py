"""Pregroup parsing, DisCoCat circuits and entropy/LSTM translation experiments."""

__version__ = "0.1.0"
