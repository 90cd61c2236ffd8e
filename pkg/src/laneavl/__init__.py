"""Lane-level vehicle location: GNSS simulation, trilateration, differential
corrections and curve-to-curve lane matching."""

__version__ = "0.1.0"
