"""Newspaper-based dengue surveillance toolkit.

Corpus ingestion and Bengali text normalization, seed-guided LDA keyword
expansion with a human-in-the-loop protocol, Disease/Intervention news
classification, and spatiotemporal analytics over official case counts,
exposed through a CLI and an HTTP service.
"""

__version__ = "0.1.0"
