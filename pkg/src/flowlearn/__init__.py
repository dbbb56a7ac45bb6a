"""Flow analytics toolkit: packet captures to flow-feature datasets and
hierarchically labeled traffic classifiers."""

__version__ = "0.1.0"
