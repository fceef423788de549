"""Figure rendering for scalesim CSV outputs.

The only coupling to the simulator is its versioned CSV schemas
(`scalesim-losses-v1`, `scalesim-plotdata-v1`); this package never imports
scalesim.
"""
from .schemas import EmptyDataError, SchemaError, read_losses, read_plotdata

__all__ = ["EmptyDataError", "SchemaError", "read_losses", "read_plotdata"]
