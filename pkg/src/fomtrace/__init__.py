"""Interactive video segmentation on pixel and superpixel graphs."""

__version__ = "0.1.0"
