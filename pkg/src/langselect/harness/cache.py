"""Append-only score cache.

The journal is a line-oriented text file, one record per scored
experiment cell and seed:

    v1<TAB>cell_key<TAB>seed<TAB>score<TAB>support<TAB>timestamp

Scores are written with ``repr`` so they round-trip bit-for-bit.
Concurrent writers append whole lines; readers tolerate duplicates
(the last record for a (cell_key, seed) pair wins, and records are
deterministic anyway).
"""
from __future__ import annotations

import logging
import threading
from datetime import datetime, timezone
from pathlib import Path

logger = logging.getLogger(__name__)

_FORMAT_TAG = "v1"


class ScoreCache:
    """In-memory score map backed by an optional on-disk journal."""

    def __init__(self, path: str | Path | None = None):
        self.path = Path(path) if path is not None else None
        self._lock = threading.Lock()
        self._entries: dict[tuple[str, int], tuple[float, int]] = {}
        if self.path is not None and self.path.exists():
            self._load()

    def _load(self) -> None:
        assert self.path is not None
        skipped = 0
        for line in self.path.read_text(encoding="utf-8").splitlines():
            if not line.strip():
                continue
            fields = line.split("\t")
            if len(fields) < 5 or fields[0] != _FORMAT_TAG:
                skipped += 1
                continue
            try:
                key, seed = fields[1], int(fields[2])
                score, support = float(fields[3]), int(fields[4])
            except ValueError:
                skipped += 1
                continue
            self._entries[(key, seed)] = (score, support)
        if skipped:
            logger.warning("%s: skipped %d malformed cache lines", self.path, skipped)

    def __len__(self) -> int:
        return len(self._entries)

    def get(self, cell_key: str, seed: int) -> tuple[float, int] | None:
        """Cached (score, eval support) for a cell/seed, or None."""
        with self._lock:
            return self._entries.get((cell_key, seed))

    def put(self, cell_key: str, seed: int, score: float, support: int) -> None:
        with self._lock:
            self._entries[(cell_key, seed)] = (score, support)
            if self.path is not None:
                stamp = datetime.now(timezone.utc).isoformat()
                line = f"{_FORMAT_TAG}\t{cell_key}\t{seed}\t{score!r}\t{support}\t{stamp}\n"
                self.path.parent.mkdir(parents=True, exist_ok=True)
                with self.path.open("a", encoding="utf-8") as fh:
                    fh.write(line)
