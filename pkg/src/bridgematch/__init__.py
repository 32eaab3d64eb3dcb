"""Bridge matching and augmented bridge matching between paired distributions."""

from bridgematch.core import RngStream, draw_gaussian, root_stream, split_stream

__all__ = ["RngStream", "draw_gaussian", "root_stream", "split_stream"]
__version__ = "0.1.0"
