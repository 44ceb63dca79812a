"""Nondivergence-form obstacle problems on 2-D grids, with VMO coefficient tools."""

__version__ = "0.1.0"
