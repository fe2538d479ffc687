from enum import Enum


class Domain(str, Enum):
    SOURCE = "source"
    TARGET = "target"


class Split(str, Enum):
    TRAIN = "train"
    QUERY = "query"
    GALLERY = "gallery"


class Activation(str, Enum):
    RELU = "relu"
    TANH = "tanh"
    IDENTITY = "identity"


class SkipPattern(str, Enum):
    NONE = "none"
    RESIDUAL = "residual"
    DENSE_CONCAT = "dense_concat"


class ParamSet(str, Enum):
    THETA = "theta"
    THETA_AVG = "theta_avg"


class ShiftKind(str, Enum):
    RANDOM = "random"
    IDENTITY = "identity"
    EXPLICIT = "explicit"


class Ablation(str, Enum):
    NO_EMA = "no_ema"
    NO_MID = "no_mid"
    NO_MTRI = "no_mtri"
    NO_AR = "no_ar"
    VOTING_ONLY = "voting_only"
    BASELINE_ENSEMBLE = "baseline_ensemble"
    SINGLE_TRANSFER = "single_transfer"


def variant_name(ablations) -> str:
    if not ablations:
        return "full"
    return "+".join(sorted(Ablation(a).value for a in ablations))
