"""feedrank-figures: renders paper-style figures from feedrank CSV outputs."""

from .render import BUILDERS, render
from .schema import SchemaError

__version__ = "0.1.0"

__all__ = ["BUILDERS", "SchemaError", "render", "__version__"]
