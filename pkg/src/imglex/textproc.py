"""Tokenization, language tagging, vocabulary construction, and OOV hashing.

This module owns the mapping from raw query strings to embedding row ids.
Ids 0..vocab_size-1 are in-vocabulary tokens ordered by descending corpus
frequency (lexicographic tie-break, so ids are reproducible across runs);
ids vocab_size..vocab_size+num_buckets-1 are hash buckets shared by all
out-of-vocabulary tokens, assigned with FNV-1a 64 so bucket assignment is
stable across platforms.
"""

from __future__ import annotations

import enum
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

from imglex.fileio import atomic_write_text

DEFAULT_MIN_COUNT = 6
DEFAULT_NUM_BUCKETS = 1_000_000

# Separators are everything that is not a Unicode letter or digit; underscore
# is explicitly a separator even though regex \w would keep it.
_SEPARATORS = re.compile(r"[\W_]+")

_FNV64_OFFSET = 0xCBF29CE484222325
_FNV64_PRIME = 0x100000001B3
_U64_MASK = 0xFFFFFFFFFFFFFFFF


class LangMode(enum.Enum):
    """Whether tokens carry a language prefix.

    AWARE prefixes every token with "<lang>:", giving each language its own
    embedding for a surface form. UNAWARE attaches no prefix, so identical
    surface forms across languages share one embedding row.
    """

    AWARE = "aware"
    UNAWARE = "unaware"

    @classmethod
    def from_string(cls, value: str) -> "LangMode":
        try:
            return cls(value.lower())
        except ValueError:
            raise ValueError(f"unknown language mode {value!r}") from None


def fnv1a64(data: bytes) -> int:
    """FNV-1a 64-bit hash of ``data`` (seed-free, portable)."""
    h = _FNV64_OFFSET
    for byte in data:
        h ^= byte
        h = (h * _FNV64_PRIME) & _U64_MASK
    return h


def tokenize(raw_query: str, lang: str | None, mode: LangMode) -> list[str]:
    """Split ``raw_query`` into normalized tokens.

    Non-alphanumeric characters (any script) become spaces, whitespace runs
    collapse, the text is lowercased. In AWARE mode each token is returned as
    "<lang>:<surface>" and ``lang`` must be a non-empty lowercase code.
    An all-separator query yields an empty list.
    """
    if mode is LangMode.AWARE:
        if not lang or lang != lang.lower() or ":" in lang or " " in lang:
            raise ValueError(f"aware mode requires a non-empty lowercase language code, got {lang!r}")
    surfaces = _SEPARATORS.sub(" ", raw_query.lower()).split()
    if mode is LangMode.AWARE:
        return [f"{lang}:{surface}" for surface in surfaces]
    return surfaces


@dataclass(frozen=True)
class Vocabulary:
    """Bidirectional token<->id map with a shared OOV hash-bucket region.

    Immutable after construction; safe for concurrent reads.
    """

    tokens: tuple[str, ...]
    num_buckets: int
    min_count: int
    mode: LangMode
    index: dict[str, int] = field(repr=False, default_factory=dict)

    def __post_init__(self):
        if self.num_buckets < 1:
            raise ValueError("num_buckets must be >= 1")
        if not self.index:
            object.__setattr__(self, "index", {t: i for i, t in enumerate(self.tokens)})
        if len(self.index) != len(self.tokens):
            raise ValueError("duplicate tokens in vocabulary")

    @property
    def vocab_size(self) -> int:
        return len(self.tokens)

    @property
    def total_ids(self) -> int:
        """Number of embedding rows: in-vocabulary tokens plus hash buckets."""
        return len(self.tokens) + self.num_buckets

    def lookup(self, token: str) -> int:
        """Id of ``token``: its vocabulary id, or a hash bucket if OOV."""
        found = self.index.get(token)
        if found is not None:
            return found
        return len(self.tokens) + fnv1a64(token.encode("utf-8")) % self.num_buckets

    def save(self, path: str | Path) -> None:
        """Serialize as text: "<vocab_size> <num_buckets> <mode>" then one token per line."""
        lines = [f"{self.vocab_size} {self.num_buckets} {self.mode.value}"]
        lines.extend(self.tokens)
        atomic_write_text(path, "\n".join(lines) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "Vocabulary":
        """Load a vocabulary saved by :meth:`save`.

        min_count is not persisted in the file format; loaded vocabularies
        report min_count=1.
        """
        text = Path(path).read_text(encoding="utf-8")
        lines = text.splitlines()
        if not lines:
            raise ValueError(f"{path}: empty vocabulary file")
        header = lines[0].split()
        if len(header) != 3:
            raise ValueError(f"{path}: malformed header {lines[0]!r}")
        vocab_size, num_buckets = int(header[0]), int(header[1])
        mode = LangMode.from_string(header[2])
        tokens = tuple(lines[1 : 1 + vocab_size])
        if len(tokens) != vocab_size:
            raise ValueError(f"{path}: expected {vocab_size} tokens, found {len(tokens)}")
        return cls(tokens=tokens, num_buckets=num_buckets, min_count=1, mode=mode)


def build_vocab(
    token_stream: Iterable[str],
    min_count: int = DEFAULT_MIN_COUNT,
    num_buckets: int = DEFAULT_NUM_BUCKETS,
    mode: LangMode = LangMode.AWARE,
) -> Vocabulary:
    """Count tokens and keep those with frequency >= ``min_count``.

    Kept tokens are ordered by descending frequency, ties broken
    lexicographically, so two builds over the same stream produce identical
    ids. An empty stream yields a valid vocabulary with vocab_size 0.
    """
    if min_count < 1:
        raise ValueError("min_count must be >= 1")
    if num_buckets < 1:
        raise ValueError("num_buckets must be >= 1")
    counts = Counter(token_stream)
    kept = sorted(
        (token for token, n in counts.items() if n >= min_count),
        key=lambda token: (-counts[token], token),
    )
    return Vocabulary(tokens=tuple(kept), num_buckets=num_buckets, min_count=min_count, mode=mode)
