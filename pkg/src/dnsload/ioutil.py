"""Small file-output helpers: atomic writes and stable JSON dumps."""

from __future__ import annotations

import json
import os
from pathlib import Path

__all__ = ["atomic_write_text", "stable_json_text"]


def atomic_write_text(path, text: str) -> None:
    """Write UTF-8 text via a temp file and rename, so readers never see
    a partially written file."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
        fh.flush()
        os.fsync(fh.fileno())
    os.replace(tmp, path)


def stable_json_text(payload) -> str:
    """Deterministic JSON serialization (sorted keys, fixed separators)."""
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"
