"""FastAPI service wrapping scenario generation, batch runs, and reports."""

from .app import create_app

__all__ = ["create_app"]
