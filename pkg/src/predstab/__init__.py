"""Pool-based active learning with a prediction-stability acquisition criterion."""

__version__ = "0.1.0"
