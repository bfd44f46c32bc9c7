"""Quality-aware robust multi-view clustering under heterogeneous observation noise."""

__version__ = "0.1.0"
