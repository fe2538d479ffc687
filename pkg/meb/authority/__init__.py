from meb.authority.scatter import (
    INTRA_FLOOR,
    authority_from_features,
    authority_weights,
    epoch_authority,
    inter_scatter,
    intra_scatter,
    scatter_ratio,
)

__all__ = [
    "INTRA_FLOOR",
    "authority_from_features",
    "authority_weights",
    "epoch_authority",
    "inter_scatter",
    "intra_scatter",
    "scatter_ratio",
]
