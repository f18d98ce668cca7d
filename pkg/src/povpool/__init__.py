"""Per-second temporal pooling and interleaved-context tooling for video QA."""

__version__ = "0.1.0"
