"""Twin a project's collaboration log into a multi-directed graph and mine it."""

__version__ = "0.1.0"
