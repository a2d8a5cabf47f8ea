"""
reports.py
==========
Atomic report writers shared by every CLI stage.

Functions:
  write_csv(frame, path)      : DataFrame -> CSV, floats at 17 significant digits
  write_json(doc, path)       : nested document -> JSON, validated before the move
  write_bytes(data, path)     : raw payload (PDF)
  ReportWriter                : tracks files per stage; a failing stage's files get ``.partial``

Each file is written to ``<name>.tmp`` first and moved into place only once
complete, so a crash never leaves a half-written report under its final name.
"""

import json
import logging
import os
import shutil
from contextlib import contextmanager
from pathlib import Path
from typing import Any, Dict, Iterator, List, Union

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"
PARTIAL_SUFFIX = ".partial"

PathLike = Union[str, Path]


# ── Low-level writers ─────────────────────────────────────────────────────────

def _move_into_place(temp_file: Path, path: Path) -> None:
    try:
        shutil.move(str(temp_file), str(path))
    except Exception:
        if temp_file.exists():
            os.remove(temp_file)
        raise


def write_csv(frame: pd.DataFrame, path: PathLike, **to_csv_kwargs) -> Path:
    """Extra keyword arguments (sep, header) go to ``DataFrame.to_csv``."""
    path = Path(path)
    temp_file = path.with_name(path.name + ".tmp")
    frame.to_csv(temp_file, index=False, float_format=FLOAT_FORMAT, lineterminator="\n", **to_csv_kwargs)
    _move_into_place(temp_file, path)
    logger.info("Wrote %s (%d rows)", path, len(frame))
    return path


def _json_default(value: Any) -> Any:
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"not JSON serializable: {type(value).__name__}")


def write_json(doc: Dict[str, Any], path: PathLike) -> Path:
    """Floats use the shortest repr that reads back to the same double."""
    path = Path(path)
    temp_file = path.with_name(path.name + ".tmp")
    with open(temp_file, "w", encoding="utf-8", newline="\n") as f:
        json.dump(doc, f, indent=2, default=_json_default, allow_nan=False)
        f.write("\n")
    # Validate before replacing anything
    with open(temp_file, "r", encoding="utf-8") as f:
        json.load(f)
    _move_into_place(temp_file, path)
    logger.info("Wrote %s", path)
    return path


def write_bytes(data: bytes, path: PathLike) -> Path:
    path = Path(path)
    temp_file = path.with_name(path.name + ".tmp")
    temp_file.write_bytes(data)
    _move_into_place(temp_file, path)
    logger.info("Wrote %s (%d bytes)", path, len(data))
    return path


# ── Stage-aware writer ────────────────────────────────────────────────────────

class ReportWriter:
    """
    Writes reports into ``out_dir``. Files written inside ``stage(...)`` are
    renamed with a ``.partial`` suffix when that stage raises; files from
    stages that completed keep their names.
    """

    def __init__(self, out_dir: PathLike):
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.written: List[Path] = []
        self._stage_files: List[Path] = []

    def path(self, name: str) -> Path:
        return self.out_dir / name

    def _track(self, path: Path) -> Path:
        self.written.append(path)
        self._stage_files.append(path)
        return path

    def csv(self, name: str, frame: pd.DataFrame, **to_csv_kwargs) -> Path:
        return self._track(write_csv(frame, self.path(name), **to_csv_kwargs))

    def json(self, name: str, doc: Dict[str, Any]) -> Path:
        return self._track(write_json(doc, self.path(name)))

    def raw(self, name: str, data: bytes) -> Path:
        return self._track(write_bytes(data, self.path(name)))

    @contextmanager
    def stage(self, name: str) -> Iterator["ReportWriter"]:
        self._stage_files = []
        try:
            yield self
        except BaseException:
            for path in self._stage_files:
                if path.exists():
                    partial = path.with_name(path.name + PARTIAL_SUFFIX)
                    shutil.move(str(path), str(partial))
                    logger.warning("Stage %s failed; kept %s", name, partial)
            raise
        finally:
            self._stage_files = []
