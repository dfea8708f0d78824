"""repo-pulse: longitudinal process metrics for software repositories."""

__version__ = "0.1.0"
