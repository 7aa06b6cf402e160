"""powerspec: power spectrum of eigenlevel sequences, simulated and computed exactly."""

__version__ = "0.1.0"
