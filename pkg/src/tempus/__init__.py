"""Covariant time observables, arrival times and Lyapunov operators on discretized spectra."""
__version__ = "0.1.0"
