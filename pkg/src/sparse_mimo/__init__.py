"""Sparse linear arrays for near-field LoS MIMO.

Modules
-------
geometry
    Array layouts, link geometry and element distances.
channel
    LoS, scattered and Rician channel matrices.
edof
    Effective degrees of freedom, exact and closed form.
rate
    Single-user rates, the EDoF rate law and sparsity selection.
multiuser
    MRT/MRC sum rate, lobe collisions and rate CDFs.
harness
    Configuration files, experiment sweeps and the command line.
"""

__version__ = "0.1.0"

from .geometry import ArrayConfig, ArrayPair, LinkGeometry, Side  # noqa: E402
from .channel import ChannelMatrix, ScattererSet, los_channel  # noqa: E402
from .edof import LobeFit, LobeParams, edof_closed_form, edof_exact  # noqa: E402
from .rate import PowerBudget, select_sparsity  # noqa: E402

__all__ = [
    "__version__",
    "ArrayConfig",
    "ArrayPair",
    "LinkGeometry",
    "Side",
    "ChannelMatrix",
    "ScattererSet",
    "los_channel",
    "LobeFit",
    "LobeParams",
    "edof_closed_form",
    "edof_exact",
    "PowerBudget",
    "select_sparsity",
]
