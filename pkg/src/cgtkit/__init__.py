"""cgtkit: a human-in-the-loop computational grounded theory workbench."""

__version__ = "0.1.0"
