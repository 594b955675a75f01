"""Bounding-box proportion index and the ratios.idx format.

Holds (artifact_id, r1, r2) rows and answers radius queries in the 2D ratio
plane, the cheap spatial pre-filter that runs before any alignment work.
"""

from __future__ import annotations

import struct

import numpy as np

RATIO_MAGIC = b"SFRX"
RATIO_VERSION = 1


class RatioFormatError(ValueError):
    """Raised for malformed ratios.idx bytes."""


class RatioIndex:
    """Immutable set of proportion points, organized for radius queries."""

    def __init__(self, entries: list[tuple[str, float, float]]):
        rows = sorted(entries)
        ids = [r[0] for r in rows]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate ids in ratio index")
        self.ids = ids
        self.points = np.array([[r[1], r[2]] for r in rows], dtype=np.float64).reshape(-1, 2)
        for rid, (r1, r2) in zip(self.ids, self.points):
            if not (0.0 < r1 <= 1.0 and 0.0 < r2 <= 1.0):
                raise ValueError(f"ratios for {rid!r} outside (0, 1]")

    def __len__(self) -> int:
        return len(self.ids)

    def __eq__(self, other) -> bool:
        if not isinstance(other, RatioIndex):
            return NotImplemented
        return self.ids == other.ids and np.array_equal(self.points, other.points)

    def within(self, r1: float, r2: float, radius: float) -> set[str]:
        """Ids whose ratio point lies within Euclidean radius of (r1, r2)."""
        if len(self.ids) == 0:
            return set()
        d2 = ((self.points - np.array([r1, r2])) ** 2).sum(axis=1)
        hit = d2 <= radius * radius
        return {self.ids[i] for i in np.flatnonzero(hit)}

    def entries(self) -> list[tuple[str, float, float]]:
        return [(rid, float(p[0]), float(p[1]))
                for rid, p in zip(self.ids, self.points)]


def ratio_index_bytes(index: RatioIndex) -> bytes:
    out = [struct.pack("<4sHI", RATIO_MAGIC, RATIO_VERSION, len(index))]
    for rid, r1, r2 in index.entries():
        raw = rid.encode("utf-8")
        out.append(struct.pack("<H", len(raw)) + raw + struct.pack("<dd", r1, r2))
    return b"".join(out)


def ratio_index_from_bytes(data: bytes) -> RatioIndex:
    try:
        magic, version, count = struct.unpack_from("<4sHI", data, 0)
    except struct.error as exc:
        raise RatioFormatError("ratio index truncated in header") from exc
    if magic != RATIO_MAGIC:
        raise RatioFormatError(f"bad magic {magic!r}")
    if version != RATIO_VERSION:
        raise RatioFormatError(f"unsupported ratio index version {version}")
    pos = struct.calcsize("<4sHI")
    entries = []
    try:
        for _ in range(count):
            (ln,) = struct.unpack_from("<H", data, pos)
            pos += 2
            rid = data[pos:pos + ln].decode("utf-8")
            pos += ln
            r1, r2 = struct.unpack_from("<dd", data, pos)
            pos += 16
            entries.append((rid, r1, r2))
    except (struct.error, UnicodeDecodeError) as exc:
        raise RatioFormatError(f"ratio index truncated at byte {pos}") from exc
    return RatioIndex(entries)
