"""Expert checkpoints: ``manifest.json`` plus a little-endian float32 ``weights.bin``.

The manifest records each expert's architecture, input width and, for both
parameter sets, every tensor's name, shape and byte offset into the blob.
"""
import json
from pathlib import Path
from typing import Any, Sequence

import numpy as np
from pydantic import ValidationError

from meb.core.errors import CheckpointError
from meb.core.utils import code_version, write_json
from meb.experts.model import ExpertModel, _tensor_set
from meb.schemas.experts import ArchitectureSpec

FORMAT = "meb-checkpoint v1"
MANIFEST = "manifest.json"
BLOB = "weights.bin"
_DTYPE = np.dtype("<f4")


def save_checkpoint(path: Path | str, experts: Sequence[ExpertModel], extra: dict[str, Any] | None = None) -> Path:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    offset = 0
    chunks: list[bytes] = []
    entries = []
    for m in experts:
        tensors = []
        for set_name, params in (("theta", m.theta), ("theta_avg", m.theta_avg)):
            for name, tensor in params.items():
                raw = np.ascontiguousarray(tensor.data, dtype=_DTYPE).tobytes()
                tensors.append({"set": set_name, "name": name, "shape": list(tensor.shape), "offset": offset,
                                "nbytes": len(raw)})
                chunks.append(raw)
                offset += len(raw)
        entries.append({"arch": m.arch.model_dump(mode="json"), "input_dim": m.input_dim, "meta": m.meta,
                        "tensors": tensors})

    (path / BLOB).write_bytes(b"".join(chunks))
    write_json(path / MANIFEST, {"format": FORMAT, "code_version": code_version(), "experts": entries,
                                 "extra": extra or {}})
    return path


def read_manifest(path: Path | str) -> dict:
    manifest_path = Path(path) / MANIFEST
    if not manifest_path.exists():
        raise CheckpointError(f"no checkpoint manifest at {manifest_path}")
    try:
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise CheckpointError(f"{manifest_path}: invalid JSON ({exc})")
    if manifest.get("format") != FORMAT:
        raise CheckpointError(f"{manifest_path}: unsupported format {manifest.get('format')!r}")
    return manifest


def load_checkpoint(path: Path | str, expected: Sequence[ArchitectureSpec] | None = None) -> list[ExpertModel]:
    path = Path(path)
    manifest = read_manifest(path)
    blob_path = path / BLOB
    if not blob_path.exists():
        raise CheckpointError(f"missing weight blob {blob_path}")
    blob = blob_path.read_bytes()

    experts = []
    for entry in manifest["experts"]:
        try:
            arch = ArchitectureSpec.model_validate(entry["arch"])
        except (ValidationError, KeyError) as exc:
            raise CheckpointError(f"{path}: bad architecture entry ({exc})")
        sets: dict[str, dict[str, np.ndarray]] = {"theta": {}, "theta_avg": {}}
        for t in entry["tensors"]:
            start, end = t["offset"], t["offset"] + t["nbytes"]
            if end > len(blob):
                raise CheckpointError(f"{path}: tensor {t['name']} runs past the end of {BLOB}")
            array = np.frombuffer(blob[start:end], dtype=_DTYPE)
            if array.size != int(np.prod(t["shape"], dtype=np.int64)):
                raise CheckpointError(f"{path}: tensor {t['name']} size does not match shape {t['shape']}")
            sets[t["set"]][t["name"]] = array.reshape(t["shape"]).astype(np.float32)
        if sets["theta"].keys() != sets["theta_avg"].keys():
            raise CheckpointError(f"{path}: expert {arch.name} stores different tensors in theta and theta_avg")
        experts.append(ExpertModel(arch=arch, input_dim=int(entry["input_dim"]), theta=_tensor_set(sets["theta"]),
                                   theta_avg=_tensor_set(sets["theta_avg"]), meta=dict(entry.get("meta", {}))))

    if expected is not None:
        stored = [m.arch for m in experts]
        if [a.model_dump() for a in stored] != [a.model_dump() for a in expected]:
            raise CheckpointError(
                f"{path}: checkpoint experts {[a.name for a in stored]} do not match the configured "
                f"{[a.name for a in expected]}"
            )
    return experts
