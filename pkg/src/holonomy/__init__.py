"""Geometric phases, Berry/Wilczek-Zee connections and Wilson-loop holonomies."""

__version__ = "0.1.0"
