"""GloVe-style word embeddings in products of Poincare balls."""

__version__ = "0.1.0"
