"""Transformer classifier plugin for the tar-bench review harness.

Speaks one JSON object per line over stdin/stdout: handshake (optionally
further pre-training with masked language modelling over the task pool),
cumulative fine-tuning, scoring, shutdown.
"""

__version__ = "0.1.0"
