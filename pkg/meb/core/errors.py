class MebError(Exception):
    """Base error; ``detail`` is the one-line diagnostic shown to the user."""

    def __init__(self, detail: str):
        super().__init__(detail)
        self.detail = detail


class DimensionError(MebError):
    pass


class NonFiniteError(MebError):
    pass


class ConfigError(MebError):
    pass


class DatasetFormatError(MebError):
    def __init__(self, detail: str, line: int | None = None):
        if line is not None:
            detail = f"line {line}: {detail}"
        super().__init__(detail)
        self.line = line


class SamplingError(MebError):
    pass


class MiningError(MebError):
    pass


class ContractError(MebError):
    pass


class ClusterError(MebError):
    pass


class DegenerateClusterError(ClusterError):
    pass


class EvaluationError(MebError):
    pass


class CheckpointError(MebError):
    pass


class TrainingAborted(MebError):
    def __init__(self, detail: str, dump_path: str | None = None):
        super().__init__(detail)
        self.dump_path = dump_path


class ArtifactMissingError(MebError):
    pass
