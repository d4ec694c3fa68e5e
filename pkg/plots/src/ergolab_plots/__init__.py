"""Figure rendering for ergolab CSV outputs.

This package consumes the CSV interchange files and run manifests only;
it never imports the lab itself and never recomputes a statistic.
"""

__version__ = "0.1.0"

from .errors import EmptyInput, PlotsError, SchemaMismatch
from .render import KINDS, PlotRequest, render

__all__ = ["EmptyInput", "KINDS", "PlotRequest", "PlotsError",
           "SchemaMismatch", "render", "__version__"]
