"""Workbench for graphs of finite groups and virtually free groups."""

from __future__ import annotations

__version__ = "0.1.0"
