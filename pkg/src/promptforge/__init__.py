"""Requirements-engineering-guided prompt refinement pipeline."""

from . import agents, cot, gateway, judge, pipeline  # noqa: F401  (schema registration)

__version__ = "0.1.0"
