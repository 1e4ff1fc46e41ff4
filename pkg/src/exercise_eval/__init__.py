"""Recognition and correctness evaluation of rehabilitation exercises from four body-worn IMUs."""

__version__ = "0.1.0"
