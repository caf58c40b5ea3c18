"""Presentation layer for rotostate artifacts.

Reads only the documented output files (branch JSON-lines, level-set and
raster CSV, diagnostics JSON) and renders PNG figures; it performs no
computation of its own beyond axis bookkeeping.
"""

__version__ = "0.1.0"
