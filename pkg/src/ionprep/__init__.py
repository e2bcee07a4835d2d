"""Rate-equation simulator for hyperfine-qubit optical pumping at intermediate field."""

__version__ = "0.1.0"
