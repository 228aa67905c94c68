"""Synthetic UI-text corpus with planted class-discriminating n-grams.

Each document is filler UI vocabulary with ``markers_per_doc`` marker phrases
spliced in. Every marker is drawn from the document's own class with
probability ``fidelity`` and from the other class otherwise. Some positive
markers are bigrams whose words also occur, split apart, in negative text,
so unigrams alone cannot fully separate the classes.
"""

from __future__ import annotations

import numpy as np

from .corpus import NEGATIVE, POSITIVE, Corpus, Document

FILLER = (
    "account add address app basket button cart checkout click continue delivery "
    "details email item menu order page payment plan price product profile "
    "settings shop size store subscription today total update view website week"
).split()

POSITIVE_MARKERS = (
    "hurry",
    "only 3 left",
    "act now",
    "limited time",
    "expires soon",
    "no thanks i hate saving",
    "selling fast",
    "last chance",
    "people are viewing",
    "deal ends",
)

NEGATIVE_MARKERS = (
    "free returns",
    "learn more",
    "terms apply",
    "customer reviews",
    "in stock",
    "contact support",
    "secure payment",
    "privacy policy",
    "now available",
    "act responsibly",
)

# markup variants exercise the HTML-stripping path
_WRAP = ("{}", "<b>{}</b>", "{}!", "<span class=\"badge\">{}</span>", "{}!!!")


def synthetic_corpus(
    n_docs: int = 1000,
    fidelity: float = 0.95,
    seed: int = 0,
    markers_per_doc: int = 3,
    filler_range: tuple = (4, 12),
) -> Corpus:
    """Balanced synthetic corpus; even-numbered documents are positive."""
    rng = np.random.default_rng(seed)
    docs = []
    for i in range(n_docs):
        label = POSITIVE if i % 2 == 0 else NEGATIVE
        words = [str(w) for w in rng.choice(FILLER, size=int(rng.integers(*filler_range, endpoint=True)))]
        own, other = (POSITIVE_MARKERS, NEGATIVE_MARKERS) if label == POSITIVE else (NEGATIVE_MARKERS, POSITIVE_MARKERS)
        for _ in range(markers_per_doc):
            pool = own if rng.random() < fidelity else other
            marker = pool[int(rng.integers(len(pool)))]
            if rng.random() < 0.5:
                marker = marker.title()
            marker = _WRAP[int(rng.integers(len(_WRAP)))].format(marker)
            words.insert(int(rng.integers(len(words) + 1)), marker)
        docs.append(Document(id=f"s{i:05d}", raw_text=" ".join(words), label=label))
    return Corpus(tuple(docs), f"synthetic(n={n_docs},fidelity={fidelity},seed={seed})")


def separable_corpus(n_docs: int = 40, seed: int = 0, marker: str = "xx") -> Corpus:
    """Tiny corpus where exactly the positive documents contain ``marker``."""
    rng = np.random.default_rng(seed)
    docs = []
    for i in range(n_docs):
        label = POSITIVE if i % 2 == 0 else NEGATIVE
        words = [str(w) for w in rng.choice(FILLER, size=int(rng.integers(3, 8)))]
        if label == POSITIVE:
            words.insert(int(rng.integers(len(words) + 1)), marker)
        docs.append(Document(id=f"d{i:04d}", raw_text=" ".join(words), label=label))
    return Corpus(tuple(docs), f"separable(n={n_docs},marker={marker},seed={seed})")
