"""Rendering for dbqsp experiment artifacts. The CSV and summary-JSON file
schemas are the whole interface; nothing here imports the dbqsp package."""

from .render import RENDERERS, gc_slopes_from_csv, render, render_report
from .schemas import SCHEMAS, SchemaError, load_csv

__all__ = [
    "RENDERERS",
    "SCHEMAS",
    "SchemaError",
    "gc_slopes_from_csv",
    "load_csv",
    "render",
    "render_report",
]
