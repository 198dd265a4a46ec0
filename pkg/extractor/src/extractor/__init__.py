"""Image feature extraction with a frozen classification backbone.

Feeds the trainer in the sibling package through its CSV contract: one row
per image, integer label first, then the 400 penultimate activations.
"""

from extractor.core import (
    FEATURE_DIM,
    ExtractionJob,
    build_backbone,
    build_transform,
    extract,
    write_csv,
)

__all__ = [
    "FEATURE_DIM",
    "ExtractionJob",
    "build_backbone",
    "build_transform",
    "extract",
    "write_csv",
]
