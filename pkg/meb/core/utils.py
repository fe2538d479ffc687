import hashlib
import json
from pathlib import Path
from typing import Any

import numpy as np

from meb import __version__


def derive_seed(base: int, *tags: Any) -> int:
    """Stable sub-seed for a named stream; identical in every process."""
    key = ":".join([str(base), *(str(tag) for tag in tags)]).encode()
    return int.from_bytes(hashlib.sha256(key).digest()[:8], "little") % (2 ** 63)


def make_rng(base: int, *tags: Any) -> np.random.Generator:
    return np.random.default_rng(derive_seed(base, *tags))


def code_version() -> str:
    return f"meb-adapt {__version__}"


def write_json(path: Path, payload: Any) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def l2_normalize(x: np.ndarray, eps: float = 1e-12) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    norms = np.sqrt(np.sum(x * x, axis=1, keepdims=True))
    return x / np.maximum(norms, eps)
