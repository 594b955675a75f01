"""Weighted inverted index over model metadata text.

Terms are normalized (lowercase, split on non-alphanumeric runs, stopwords
dropped, Porter-stemmed) and posted per field.  A match in a more specific
field is worth more: names weigh the most, categories the least.  A record
scores the sum over matched distinct query terms and fields of
weight(field) * term_frequency.
"""

from __future__ import annotations

import re
import struct
from dataclasses import dataclass
from collections import Counter

from .stemmer import stem
from .stopwords import STOPWORDS

TEXT_MAGIC = b"SFTX"
TEXT_VERSION = 1

# field storage order and codes in postings
FIELDS = ("name", "tags", "description", "category")

_TOKEN_SPLIT = re.compile(r"[^a-z0-9]+")


class TextFormatError(ValueError):
    """Raised for malformed text index bytes."""


@dataclass(frozen=True)
class FieldWeights:
    """Per-field match weights, most specific field weighs most."""

    name: float = 10.0
    tags: float = 5.0
    description: float = 2.0
    category: float = 1.0

    def __post_init__(self):
        if not (self.name > self.tags > self.description > self.category > 0):
            raise ValueError(
                "weights must be positive and strictly decreasing from "
                "name to category"
            )

    def by_code(self, code: int) -> float:
        return (self.name, self.tags, self.description, self.category)[code]


@dataclass(frozen=True)
class Posting:
    artifact_id: str
    field: str
    term_frequency: int


def normalize_text(text: str) -> list[str]:
    """Lowercase, split on non-alphanumeric runs, drop stopwords, stem."""
    tokens = _TOKEN_SPLIT.split(text.lower())
    out = []
    for tok in tokens:
        if not tok or tok in STOPWORDS:
            continue
        stemmed = stem(tok)
        if stemmed:
            out.append(stemmed)
    return out


class TextIndex:
    """Immutable term -> postings map over a fixed catalog id list."""

    def __init__(self, ids: list[str], weights: FieldWeights,
                 postings: dict[str, list[tuple[int, int, int]]]):
        # postings: term -> [(id_index, field_code, term_frequency)], sorted
        self.ids = list(ids)
        self.weights = weights
        self.postings = postings

    def __eq__(self, other) -> bool:
        if not isinstance(other, TextIndex):
            return NotImplemented
        return (
            self.ids == other.ids
            and self.weights == other.weights
            and self.postings == other.postings
        )

    def term_postings(self, term: str) -> list[Posting]:
        return [
            Posting(self.ids[i], FIELDS[f], tf)
            for i, f, tf in self.postings.get(term, [])
        ]

    def has_any_term(self, terms) -> bool:
        return any(t in self.postings for t in terms)

    def score_tokens(self, tokens) -> dict[str, float]:
        """Score records against distinct normalized query tokens."""
        scores: dict[int, float] = {}
        for term in set(tokens):
            for id_idx, field_code, tf in self.postings.get(term, ()):
                scores[id_idx] = scores.get(id_idx, 0.0) + self.weights.by_code(field_code) * tf
        return {self.ids[i]: s for i, s in scores.items()}


def build_text_index(records, weights: FieldWeights | None = None) -> TextIndex:
    """Index name/tags/description/category text of catalog records.

    records: iterable with .id, .name, .description, .tags, .category.
    """
    weights = weights or FieldWeights()
    recs = list(records)
    ids = [r.id for r in recs]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate record ids")
    acc: dict[str, list[tuple[int, int, int]]] = {}
    for idx, rec in enumerate(recs):
        fields = (
            rec.name,
            " ".join(rec.tags),
            rec.description,
            rec.category,
        )
        for code, text in enumerate(fields):
            for term, tf in Counter(normalize_text(text)).items():
                acc.setdefault(term, []).append((idx, code, tf))
    postings = {term: sorted(rows) for term, rows in sorted(acc.items())}
    return TextIndex(ids, weights, postings)


def query_text(index: TextIndex, query: str, limit: int | None = None,
               offset: int = 0) -> list[tuple[str, float]]:
    """Ranked (artifact_id, score) matches, score descending then id ascending.

    Records scoring zero are omitted; an empty or all-stopword query returns
    no matches.
    """
    tokens = normalize_text(query)
    if not tokens:
        return []
    scores = index.score_tokens(tokens)
    ranked = sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))
    if offset:
        ranked = ranked[offset:]
    if limit is not None:
        ranked = ranked[:limit]
    return ranked


def text_index_bytes(index: TextIndex) -> bytes:
    """Serialize: header with weights, id table, sorted term dictionary."""
    out = [struct.pack(
        "<4sHdddd", TEXT_MAGIC, TEXT_VERSION,
        index.weights.name, index.weights.tags,
        index.weights.description, index.weights.category,
    )]
    out.append(struct.pack("<I", len(index.ids)))
    for rid in index.ids:
        raw = rid.encode("utf-8")
        out.append(struct.pack("<H", len(raw)) + raw)
    terms = sorted(index.postings, key=lambda t: t.encode("utf-8"))
    out.append(struct.pack("<I", len(terms)))
    for term in terms:
        raw = term.encode("utf-8")
        rows = index.postings[term]
        out.append(struct.pack("<H", len(raw)) + raw + struct.pack("<I", len(rows)))
        for id_idx, field_code, tf in rows:
            out.append(struct.pack("<IBI", id_idx, field_code, tf))
    return b"".join(out)


def text_index_from_bytes(data: bytes) -> TextIndex:
    try:
        magic, version, w_name, w_tags, w_desc, w_cat = struct.unpack_from(
            "<4sHdddd", data, 0)
    except struct.error as exc:
        raise TextFormatError("text index truncated in header") from exc
    if magic != TEXT_MAGIC:
        raise TextFormatError(f"bad magic {magic!r}")
    if version != TEXT_VERSION:
        raise TextFormatError(f"unsupported text index version {version}")
    pos = struct.calcsize("<4sHdddd")
    try:
        (n_ids,) = struct.unpack_from("<I", data, pos)
        pos += 4
        ids = []
        for _ in range(n_ids):
            (ln,) = struct.unpack_from("<H", data, pos)
            pos += 2
            ids.append(data[pos:pos + ln].decode("utf-8"))
            pos += ln
        (n_terms,) = struct.unpack_from("<I", data, pos)
        pos += 4
        postings: dict[str, list[tuple[int, int, int]]] = {}
        for _ in range(n_terms):
            (ln,) = struct.unpack_from("<H", data, pos)
            pos += 2
            term = data[pos:pos + ln].decode("utf-8")
            pos += ln
            (n_rows,) = struct.unpack_from("<I", data, pos)
            pos += 4
            rows = []
            for _ in range(n_rows):
                id_idx, field_code, tf = struct.unpack_from("<IBI", data, pos)
                pos += struct.calcsize("<IBI")
                if id_idx >= len(ids) or field_code >= len(FIELDS):
                    raise TextFormatError(f"posting out of range in term {term!r}")
                rows.append((id_idx, field_code, tf))
            postings[term] = rows
    except (struct.error, UnicodeDecodeError) as exc:
        raise TextFormatError(f"text index truncated at byte {pos}") from exc
    weights = FieldWeights(w_name, w_tags, w_desc, w_cat)
    return TextIndex(ids, weights, postings)
