"""liftlab: event-driven samplers and spectral checks for lifted Markov processes."""

__version__ = "0.1.0"
