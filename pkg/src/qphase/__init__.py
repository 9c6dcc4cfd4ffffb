"""Phase-space wave functions: transport, operators, stationary states and checks."""
__version__ = "0.1.0"
