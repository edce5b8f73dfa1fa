"""Atomic artifact writing and configuration hashing."""

from __future__ import annotations

import hashlib
import json
import os
import tempfile

__all__ = ["atomic_write_text", "config_hash"]


def atomic_write_text(path: str, text: str):
    """Write text to path via a temporary file and rename.

    An interrupted run never leaves a truncated artifact at the target
    path: either the old content survives or the new content is
    complete.
    """
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix="~")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def config_hash(config: dict) -> str:
    """Short stable hash of a JSON-serializable configuration."""
    payload = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(payload.encode()).hexdigest()[:16]
