"""``meb-dataset v1`` text format.

    meb-dataset v1
    domain=target dim=32 train=1000 query=100 gallery=400
    split,identity,camera,f_0,...,f_31
    train,100,2,0.25,...

Feature values are written as the shortest decimal that reads back to the same
float32, so ``load_dataset(save_dataset(d)) == d`` exactly.
"""
import csv
from pathlib import Path

import numpy as np

from meb.core.errors import DatasetFormatError
from meb.data.records import SampleRecord, SampleSet, SplitDataset
from meb.schemas.enums import Domain, Split

MAGIC = "meb-dataset v1"
_SPLITS = (Split.TRAIN, Split.QUERY, Split.GALLERY)


def _format(value: np.float32) -> str:
    return np.format_float_positional(value, unique=True, trim="-")


def save_dataset(dataset: SplitDataset, path: Path | str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    parts = {Split.TRAIN: dataset.train, Split.QUERY: dataset.query, Split.GALLERY: dataset.gallery}
    D = dataset.input_dim
    with path.open("w", encoding="utf-8", newline="") as fh:
        fh.write(MAGIC + "\n")
        counts = " ".join(f"{split.value}={len(parts[split])}" for split in _SPLITS)
        fh.write(f"domain={dataset.domain.value} dim={D} {counts}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["split", "identity", "camera", *(f"f_{d}" for d in range(D))])
        for split in _SPLITS:
            for record in parts[split].records:
                writer.writerow([split.value, record.identity, record.camera, *(_format(v) for v in record.features)])
    return path


def _parse_header(line: str) -> dict[str, str]:
    fields = {}
    for token in line.split():
        key, sep, value = token.partition("=")
        if not sep:
            raise DatasetFormatError(f"malformed header token '{token}'", line=2)
        fields[key] = value
    for key in ("domain", "dim", *(s.value for s in _SPLITS)):
        if key not in fields:
            raise DatasetFormatError(f"header is missing '{key}'", line=2)
    return fields


def _header_int(fields: dict[str, str], key: str) -> int:
    try:
        value = int(fields[key])
    except ValueError:
        raise DatasetFormatError(f"header field '{key}' is not an integer: {fields[key]!r}", line=2)
    if value < 0 or (key == "dim" and value < 1):
        raise DatasetFormatError(f"header field '{key}' out of range: {value}", line=2)
    return value


def load_dataset(path: Path | str) -> SplitDataset:
    path = Path(path)
    with path.open("r", encoding="utf-8", newline="") as fh:
        lines = fh.read().splitlines()

    if not lines or lines[0].strip() != MAGIC:
        raise DatasetFormatError(f"expected '{MAGIC}' header", line=1)
    if len(lines) < 3:
        raise DatasetFormatError("file ends inside the header", line=len(lines) + 1)

    fields = _parse_header(lines[1])
    try:
        domain = Domain(fields["domain"])
    except ValueError:
        raise DatasetFormatError(f"unknown domain '{fields['domain']}'", line=2)
    D = _header_int(fields, "dim")
    expected = {split: _header_int(fields, split.value) for split in _SPLITS}

    columns = next(csv.reader([lines[2]]))
    if len(columns) != D + 3 or columns[:3] != ["split", "identity", "camera"]:
        raise DatasetFormatError(f"column header does not describe {D} features", line=3)

    rows: dict[Split, list[SampleRecord]] = {split: [] for split in _SPLITS}
    for lineno, row in enumerate(csv.reader(lines[3:]), start=4):
        if not row:
            continue
        if len(row) != D + 3:
            raise DatasetFormatError(f"row has {len(row) - 3} feature values, header says D={D}", line=lineno)
        try:
            split = Split(row[0])
        except ValueError:
            raise DatasetFormatError(f"unknown split '{row[0]}'", line=lineno)
        try:
            identity, camera = int(row[1]), int(row[2])
            values = np.array(row[3:], dtype=np.float32)
        except ValueError as exc:
            raise DatasetFormatError(f"unparsable value ({exc})", line=lineno)
        if identity < 0 or camera < 0:
            raise DatasetFormatError("identity and camera must be non-negative", line=lineno)
        if not np.all(np.isfinite(values)):
            raise DatasetFormatError("non-finite feature value", line=lineno)
        rows[split].append(SampleRecord(values, identity, camera, domain))

    parts = {}
    for split in _SPLITS:
        found = len(rows[split])
        if found != expected[split]:
            raise DatasetFormatError(
                f"expected {expected[split]} {split.value} rows, found {found} (truncated file?)",
                line=len(lines),
            )
        parts[split] = SampleSet.from_records(rows[split], domain, D)

    try:
        return SplitDataset(domain=domain, train=parts[Split.TRAIN], query=parts[Split.QUERY],
                            gallery=parts[Split.GALLERY])
    except ValueError as exc:
        raise DatasetFormatError(str(exc))
