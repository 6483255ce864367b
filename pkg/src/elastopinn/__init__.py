"""Physics-informed neural networks for small-strain linear elastostatics."""

__version__ = "0.1.0"
