"""Streaming anomaly detection for IoT traffic with concept-drift-aware online learners."""

from .labels import BENIGN, MALICIOUS, Label

__version__ = "0.1.0"

__all__ = ["BENIGN", "MALICIOUS", "Label", "__version__"]
