"""Sign language translation from 2-D pose keypoints."""

__version__ = "0.1.0"
