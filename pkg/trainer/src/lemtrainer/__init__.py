"""Toy continual pre-training harness.

Trains a small transformer encoder on masked-example JSONL files produced by
the data pipeline, runs the two-stage schedule (monolingual stack first,
then concatenated pairs), selects checkpoints by validation loss, and
exports mean-pooled sentence embeddings in the pipeline's binary exchange
format. Everything is file based: this package never imports the pipeline.
"""

__version__ = "0.1.0"
