"""Figure rendering for network-convergence results CSV files.

Consumes only the published CSV contract (commented header + metadata
line + fixed column set) — never the simulation package's internals.
"""

from .figures import (
    DEFAULT_REFERENCE_SLOPES,
    FigureRequest,
    render,
    render_decay,
    render_overlay,
)
from .parser import (
    CsvFormatError,
    ResultRow,
    ResultTable,
    SampleSet,
    read_results,
    read_samples,
)

__all__ = [
    "DEFAULT_REFERENCE_SLOPES",
    "FigureRequest",
    "render",
    "render_decay",
    "render_overlay",
    "CsvFormatError",
    "ResultRow",
    "ResultTable",
    "SampleSet",
    "read_results",
    "read_samples",
]

__version__ = "0.1.0"
