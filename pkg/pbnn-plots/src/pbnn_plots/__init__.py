"""Static figures over pbnn CSV outputs.

The plotting layer is a pure view: it parses the delimited tables the
sampler CLI writes (prediction bands, batch-size sweeps) and renders them
to image files without recomputing any statistic.
"""

from .io import SchemaError, read_table, sha256_of
from .bands import BandSeries, load_bands, plot_bands
from .sweep import SweepTable, load_sweep, plot_sweep

__all__ = [
    "SchemaError",
    "read_table",
    "sha256_of",
    "BandSeries",
    "load_bands",
    "plot_bands",
    "SweepTable",
    "load_sweep",
    "plot_sweep",
]

__version__ = "0.1.0"
