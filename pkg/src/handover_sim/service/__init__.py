"""HTTP wrapper around the handover planning and simulation core."""

from .app import app, create_app

__all__ = ["app", "create_app"]
