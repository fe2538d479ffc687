import json
from pathlib import Path
from typing import IO, Any

from meb.core.logger import logger


def _plain(value: Any) -> Any:
    if hasattr(value, "tolist"):
        return value.tolist()
    if hasattr(value, "value"):
        return value.value
    return str(value)


class MetricsPublisher:
    """Appends ``{"type": ..., "payload": ...}`` events to a JSON-lines file.

    Events carry no timestamps or ids, so identical runs write identical files.
    """

    def __init__(self, path: Path | str, mode: str = "w"):
        self.path = Path(path)
        self.mode = mode
        self.stream: IO[str] | None = None
        self.events = 0

    def connect(self) -> "MetricsPublisher":
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self.stream = self.path.open(self.mode, encoding="utf-8", newline="\n")
        return self

    def publish(self, event_type: str, payload: dict) -> None:
        if self.stream is None:
            self.connect()
        line = json.dumps({"type": event_type, "payload": payload}, sort_keys=True, default=_plain)
        self.stream.write(line + "\n")
        self.stream.flush()
        self.events += 1
        logger.debug("Published metrics event", event_type=event_type)

    def close(self) -> None:
        if self.stream is not None:
            self.stream.close()
            self.stream = None

    def __enter__(self) -> "MetricsPublisher":
        return self.connect()

    def __exit__(self, exc_type, exc_val, exc_tb) -> None:
        self.close()


class NullPublisher:
    """Publisher that drops every event."""

    events = 0

    def publish(self, event_type: str, payload: dict) -> None:
        pass

    def close(self) -> None:
        pass
