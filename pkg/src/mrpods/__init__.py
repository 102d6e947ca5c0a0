"""Printable optical data sheets: compress, protect, rasterise, recover."""

__version__ = "0.1.0"
