"""iplan: interactive, step-wise floorplan synthesis."""

__version__ = "0.1.0"
