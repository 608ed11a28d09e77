"""Statistical electoral-bias detection for first-past-the-post elections."""

__version__ = "0.1.0"
