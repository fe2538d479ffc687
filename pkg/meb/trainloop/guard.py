from pathlib import Path
from typing import Any

import numpy as np

from meb.core.errors import TrainingAborted
from meb.core.logger import logger
from meb.core.utils import write_json


def abort_training(reason: str, out_dir: Path | None, context: dict[str, Any]) -> TrainingAborted:
    """Write ``abort.json`` (when an output directory is known) and build the exception to raise."""
    dump_path = None
    if out_dir is not None:
        dump_path = Path(out_dir) / "abort.json"
        write_json(dump_path, {"reason": reason, **context})
    logger.error("Training aborted", reason=reason, dump=str(dump_path) if dump_path else None, **context)
    return TrainingAborted(reason, dump_path=str(dump_path) if dump_path else None)


def non_finite(grads: dict[str, np.ndarray]) -> list[str]:
    return [name for name, g in grads.items() if not np.all(np.isfinite(g))]
