"""Render relayee experiment CSV files into publication-style figures."""

from .figures import FigureSpec, SchemaMismatch, render

__all__ = ["FigureSpec", "SchemaMismatch", "render"]
