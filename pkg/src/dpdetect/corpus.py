"""Dataset ingestion, text cleaning and seeded train/test splitting."""

from __future__ import annotations

import csv
import re
from dataclasses import dataclass, field, replace
from pathlib import Path

from .errors import CorpusError, SplitError

POSITIVE = 1
NEGATIVE = 0
LABEL_NAMES = {POSITIVE: "dark", NEGATIVE: "not_dark"}

_LABEL_TOKENS = {
    "1": POSITIVE,
    "0": NEGATIVE,
    "dark": POSITIVE,
    "not_dark": NEGATIVE,
}

_MASK64 = (1 << 64) - 1


class SplitMix64:
    """Portable 64-bit generator used for every shuffle in the package."""

    def __init__(self, seed: int):
        self.state = seed & _MASK64

    def next(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & _MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)


def shuffle(items: list, rng: SplitMix64) -> list:
    """Fisher-Yates, descending i, j = next() mod (i + 1). Returns a new list."""
    out = list(items)
    for i in range(len(out) - 1, 0, -1):
        j = rng.next() % (i + 1)
        out[i], out[j] = out[j], out[i]
    return out


@dataclass(frozen=True)
class Document:
    id: str
    raw_text: str
    label: int
    clean_text: str = ""

    def __post_init__(self):
        if self.label not in (POSITIVE, NEGATIVE):
            raise CorpusError(f"document {self.id!r}: label must be 0 or 1, got {self.label!r}")


@dataclass(frozen=True)
class Corpus:
    documents: tuple[Document, ...]
    provenance: str = ""
    _ids: frozenset = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        docs = tuple(self.documents)
        object.__setattr__(self, "documents", docs)
        ids = frozenset(d.id for d in docs)
        if len(ids) != len(docs):
            raise CorpusError("document ids must be unique")
        object.__setattr__(self, "_ids", ids)

    def __len__(self):
        return len(self.documents)

    def __iter__(self):
        return iter(self.documents)

    def __getitem__(self, i):
        return self.documents[i]

    @property
    def labels(self) -> list[int]:
        return [d.label for d in self.documents]

    @property
    def texts(self) -> list[str]:
        return [d.clean_text for d in self.documents]

    @property
    def positive_count(self) -> int:
        return sum(d.label == POSITIVE for d in self.documents)

    @property
    def negative_count(self) -> int:
        return len(self.documents) - self.positive_count

    @property
    def average_length(self) -> float:
        """Mean whitespace word count of the raw texts (0 for an empty corpus)."""
        if not self.documents:
            return 0.0
        return sum(len(d.raw_text.split()) for d in self.documents) / len(self.documents)

    def stats(self) -> dict:
        return {
            "source": self.provenance,
            "total": len(self),
            "positive": self.positive_count,
            "negative": self.negative_count,
            "average_words": self.average_length,
        }

    def subset(self, indices) -> "Corpus":
        return Corpus(tuple(self.documents[i] for i in indices), self.provenance)

    def preprocessed(self, strip_html: bool = True, lowercase: bool = True) -> "Corpus":
        docs = tuple(
            replace(d, clean_text=preprocess(d.raw_text, strip_html=strip_html, lowercase=lowercase))
            for d in self.documents
        )
        return Corpus(docs, self.provenance)


def parse_label(token: str) -> int:
    key = token.strip().lower()
    if key not in _LABEL_TOKENS:
        raise KeyError(token)
    return _LABEL_TOKENS[key]


def load_corpus(path, format: str = "csv") -> Corpus:
    """Read a ``text,label`` CSV file into a Corpus in file order.

    An optional ``id`` column supplies document ids; otherwise the 1-based
    data row number is used. Other extra columns are ignored. Errors name the
    1-based data row (the header is not counted).
    """
    if format != "csv":
        raise CorpusError(f"unsupported dataset format {format!r}")
    path = Path(path)
    docs = []
    with path.open("r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CorpusError(f"{path}: empty file, expected header 'text,label'") from None
        header = [h.strip().lstrip("﻿").lower() for h in header]
        if "text" not in header or "label" not in header:
            raise CorpusError(f"{path}: header must contain 'text' and 'label', got {header}")
        ti, li = header.index("text"), header.index("label")
        ii = header.index("id") if "id" in header else None
        for rowno, row in enumerate(reader, start=1):
            if len(row) != len(header):
                raise CorpusError(
                    f"{path}: row {rowno}: expected {len(header)} columns, got {len(row)}", row=rowno
                )
            try:
                label = parse_label(row[li])
            except KeyError:
                raise CorpusError(
                    f"{path}: row {rowno}: unrecognized label {row[li]!r}", row=rowno
                ) from None
            doc_id = row[ii] if ii is not None else str(rowno)
            docs.append(Document(id=doc_id, raw_text=row[ti], label=label))
    try:
        return Corpus(tuple(docs), str(path))
    except CorpusError as exc:
        raise CorpusError(f"{path}: {exc}") from None


def write_corpus(corpus: Corpus, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "text", "label"])
        for d in corpus:
            w.writerow([d.id, d.raw_text, d.label])


_TAG = re.compile(r"<[^>]*>?")
_WS = re.compile(r"\s+")


def _keep(ch: str) -> bool:
    return ch.isalpha() or ch.isdigit() or ch.isspace()


def preprocess(raw_text: str, strip_html: bool = True, lowercase: bool = True) -> str:
    """Strip tags, blank out punctuation, lowercase and squeeze whitespace.

    A ``<`` with no closing ``>`` swallows the rest of the string. Combining
    marks produced by lowercasing (``"İ".lower()``) are dropped so the
    function stays idempotent.
    """
    text = _TAG.sub("", raw_text) if strip_html else raw_text
    text = "".join(ch if _keep(ch) else " " for ch in text)
    if lowercase:
        text = "".join(ch for ch in text.lower() if _keep(ch))
    return _WS.sub(" ", text).strip()


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.8
    seed: int = 0
    stratified: bool = True

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise SplitError(f"train_fraction must be in (0, 1), got {self.train_fraction}")
        if not 0 <= self.seed <= _MASK64:
            raise SplitError("seed must be an unsigned 64-bit integer")


def split_indices(labels, spec: SplitSpec) -> tuple[list[int], list[int]]:
    """Train/test index lists (each ascending) for the given labels."""
    n = len(labels)
    if n == 0:
        raise SplitError("cannot split an empty corpus")
    rng = SplitMix64(spec.seed)
    train = []
    if spec.stratified:
        for cls in (POSITIVE, NEGATIVE):
            members = [i for i, y in enumerate(labels) if y == cls]
            if not members:
                raise SplitError(f"class {LABEL_NAMES[cls]!r} has no documents")
            members = shuffle(members, rng)
            train.extend(members[: int(spec.train_fraction * len(members))])
    else:
        order = shuffle(list(range(n)), rng)
        train = order[: int(spec.train_fraction * n)]
    train_set = set(train)
    test = [i for i in range(n) if i not in train_set]
    if not train or not test:
        raise SplitError(f"degenerate split: {len(train)} train / {len(test)} test documents")
    return sorted(train), test


def split(corpus: Corpus, spec: SplitSpec) -> tuple[Corpus, Corpus]:
    train, test = split_indices(corpus.labels, spec)
    return corpus.subset(train), corpus.subset(test)
