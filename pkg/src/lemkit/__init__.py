"""Entity-aware masking pipeline for multilingual continual pre-training data.

Subpackages cover the full data path: corpus cleaning, sub-word tokenization
with word alignment, entity-span annotation, masked-example generation
(entity-priority and baseline strategies), a binary sentence-embedding
exchange format, margin-based bitext mining, and cosine-ranked parallel
corpus curation. Everything is seeded and reproducible; see README for the
RNG contract.
"""

__version__ = "0.1.0"
