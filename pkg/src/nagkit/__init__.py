"""Node-aligned graph-to-graph retrosynthesis data pipeline and reference kernels."""

__version__ = "0.1.0"
