"""HTTP front end over a directory of run logs and fitted weights."""

from .app import create_app

__all__ = ["create_app"]
