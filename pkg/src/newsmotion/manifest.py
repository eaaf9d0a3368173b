"""Stage manifests for artifact caching, plus the work-dir lock.

Each pipeline stage records the content hashes of its inputs and outputs,
the hash of the config keys it depends on, the seed, and tool versions.
A stage is skippable when its manifest still matches all of those, which
lets expensive stages cache their artifacts across reruns.
"""

from __future__ import annotations

import contextlib
import hashlib
import json
import logging
import os
import platform
from pathlib import Path
from typing import Iterator, Mapping

import numpy as np

from . import __version__
from .errors import PipelineError

logger = logging.getLogger(__name__)

_CHUNK = 1 << 20


def file_sha256(path: str | Path) -> str:
    digest = hashlib.sha256()
    with Path(path).open("rb") as fh:
        while True:
            chunk = fh.read(_CHUNK)
            if not chunk:
                break
            digest.update(chunk)
    return digest.hexdigest()


def text_sha256(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def _versions() -> dict[str, str]:
    return {
        "package": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
    }


def manifest_path(work_dir: str | Path, stage: str) -> Path:
    return Path(work_dir) / f"{stage}.manifest.json"


def write_manifest(
    work_dir: str | Path,
    stage: str,
    inputs: Mapping[str, Path],
    outputs: Mapping[str, Path],
    config_hash: str,
    seed: int,
) -> None:
    """Record the stage's input and output hashes after a successful run."""
    record = {
        "stage": stage,
        "config": config_hash,
        "seed": seed,
        "inputs": {name: file_sha256(path) for name, path in sorted(inputs.items())},
        "outputs": {name: file_sha256(path) for name, path in sorted(outputs.items())},
        "versions": _versions(),
    }
    path = manifest_path(work_dir, stage)
    path.write_text(
        json.dumps(record, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def up_to_date(
    work_dir: str | Path,
    stage: str,
    inputs: Mapping[str, Path],
    outputs: Mapping[str, Path],
    config_hash: str,
    seed: int,
) -> bool:
    """Whether the stage's manifest still matches its inputs and outputs."""
    path = manifest_path(work_dir, stage)
    if not path.is_file():
        return False
    try:
        record = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError):
        return False
    if record.get("config") != config_hash or record.get("seed") != seed:
        return False
    if record.get("versions") != _versions():
        return False
    for name, file in sorted(inputs.items()):
        if not Path(file).is_file():
            return False
        if record.get("inputs", {}).get(name) != file_sha256(file):
            return False
    recorded_outputs = record.get("outputs", {})
    if set(recorded_outputs) != set(outputs):
        return False
    for name, file in sorted(outputs.items()):
        if not Path(file).is_file():
            return False
        if recorded_outputs[name] != file_sha256(file):
            return False
    return True


@contextlib.contextmanager
def work_dir_lock(work_dir: str | Path) -> Iterator[None]:
    """Exclusive lock on the work dir; concurrent runs against it refuse to start."""
    work_dir = Path(work_dir)
    work_dir.mkdir(parents=True, exist_ok=True)
    lock = work_dir / ".lock"
    try:
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise PipelineError(
            f"work dir {work_dir} is locked by another run; "
            f"remove {lock} if that run is gone"
        ) from None
    try:
        os.write(fd, f"{os.getpid()}\n".encode())
        os.close(fd)
        yield
    finally:
        with contextlib.suppress(OSError):
            lock.unlink()
