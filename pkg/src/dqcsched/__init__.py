"""Batch scheduling of quantum circuits across networked QPUs."""

from __future__ import annotations

__version__ = "0.1.0"
