"""Masked-token infilling backends.

Two backends implement one contract: a count-based filler built from a
reference corpus (so the whole pipeline runs offline) and an adapter for an
out-of-process fill service speaking JSON over HTTP.
"""

from __future__ import annotations

import json
import time
from collections import Counter
from dataclasses import dataclass
from typing import Protocol

import requests

from .corpus import OUTSIDE, Dataset
from .errors import ProtocolError, TransportError

# weight of the bare frequency term relative to neighbor co-occurrence counts
_UNIGRAM_WEIGHT = 0.1


@dataclass(frozen=True)
class MaskQuery:
    tokens: tuple[str, ...]
    mask_indices: tuple[int, ...]
    top_k: int
    # original texts at the mask positions that must not come back, aligned
    # with mask_indices; None entries mean "no exclusion at this position"
    exclude: tuple[str | None, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(self.tokens))
        object.__setattr__(self, "mask_indices", tuple(self.mask_indices))
        if self.exclude is not None:
            object.__setattr__(self, "exclude", tuple(self.exclude))
        if self.top_k < 1:
            raise ValueError("top_k must be >= 1")
        if not self.mask_indices:
            raise ValueError("at least one mask position is required")
        for i in self.mask_indices:
            if not 0 <= i < len(self.tokens):
                raise ValueError(f"mask index {i} out of bounds")
        if any(b <= a for a, b in zip(self.mask_indices, self.mask_indices[1:])):
            raise ValueError("mask indices must be strictly increasing")
        if len(self.mask_indices) == 2 and self.mask_indices[1] != self.mask_indices[0] + 1:
            raise ValueError("a two-position mask must be contiguous")
        if self.exclude is not None and len(self.exclude) != len(self.mask_indices):
            raise ValueError("exclude must align with mask_indices")


@dataclass(frozen=True)
class FillCandidate:
    token: str
    score: float

    def __post_init__(self):
        if not self.token or any(c.isspace() for c in self.token):
            raise ValueError(f"candidate token must be non-empty and whitespace-free: {self.token!r}")


class Filler(Protocol):
    def fill(self, query: MaskQuery) -> list[list[FillCandidate]]:
        """Per mask position, at most top_k candidates, best score first."""
        ...


class UnigramFiller:
    """Count-based filler over a reference corpus.

    A candidate w for position i scores
    count(left neighbor, w) + count(w, right neighbor) + 0.1 * count(w);
    neighbor terms vanish at sentence boundaries. With a context window W > 1
    the neighbor terms extend to offsets 1..W with distance-specific pair
    counts. Candidates are the corpus tokens that occur with tag O, minus the
    token currently at the masked position and any query exclusions.
    """

    def __init__(
        self,
        vocab: tuple[str, ...],
        unigram_counts: Counter,
        pair_counts: dict[int, Counter],
        context_window: int,
    ):
        self._vocab = vocab
        self._unigram = unigram_counts
        self._pairs = pair_counts
        self._window = context_window

    def fill(self, query: MaskQuery) -> list[list[FillCandidate]]:
        results: list[list[FillCandidate]] = []
        n = len(query.tokens)
        for pos, i in enumerate(query.mask_indices):
            banned = {query.tokens[i]}
            if query.exclude is not None and query.exclude[pos] is not None:
                banned.add(query.exclude[pos])
            scored: list[tuple[float, str]] = []
            for w in self._vocab:
                if w in banned:
                    continue
                score = _UNIGRAM_WEIGHT * self._unigram[w]
                for offset in range(1, self._window + 1):
                    pairs = self._pairs[offset]
                    if i - offset >= 0:
                        score += pairs[(query.tokens[i - offset], w)]
                    if i + offset < n:
                        score += pairs[(w, query.tokens[i + offset])]
                scored.append((score, w))
            scored.sort(key=lambda sw: (-sw[0], sw[1]))
            results.append([FillCandidate(w, s) for s, w in scored[: query.top_k]])
        return results


def build_unigram_filler(d: Dataset, context_window: int = 1) -> UnigramFiller:
    if not d.sentences:
        raise ValueError("cannot build a filler from an empty dataset")
    if context_window < 1:
        raise ValueError("context_window must be >= 1")
    vocab: list[str] = []
    seen: set[str] = set()
    unigram: Counter = Counter()
    pairs: dict[int, Counter] = {o: Counter() for o in range(1, context_window + 1)}
    for s in d.sentences:
        texts = s.texts()
        for tok in s.tokens:
            unigram[tok.text] += 1
            if tok.tag == OUTSIDE and tok.text not in seen:
                seen.add(tok.text)
                vocab.append(tok.text)
        for offset in range(1, context_window + 1):
            counter = pairs[offset]
            for i in range(len(texts) - offset):
                counter[(texts[i], texts[i + offset])] += 1
    return UnigramFiller(tuple(vocab), unigram, pairs, context_window)


class ExternalFiller:
    """Adapter for a fill service: POST {endpoint}/fill with the query,
    expect {"candidates": [[{"token", "score"}, ...], ...]} aligned with the
    mask positions.
    """

    def __init__(self, endpoint: str, timeout: float):
        self.endpoint = endpoint.rstrip("/")
        self.timeout = timeout

    def fill(self, query: MaskQuery) -> list[list[FillCandidate]]:
        exclude = query.exclude or tuple(None for _ in query.mask_indices)
        payload = {
            "tokens": list(query.tokens),
            "mask_indices": list(query.mask_indices),
            "top_k": query.top_k,
            "exclude": [e if e is not None else "" for e in exclude],
        }
        start = time.monotonic()
        try:
            response = requests.post(f"{self.endpoint}/fill", json=payload, timeout=self.timeout)
        except requests.RequestException as exc:
            raise TransportError(self.endpoint, time.monotonic() - start, str(exc)) from exc
        if response.status_code != 200:
            raise ProtocolError(
                f"fill service answered HTTP {response.status_code}", response.text[:200]
            )
        try:
            doc = response.json()
        except ValueError as exc:
            raise ProtocolError("fill response is not JSON", response.text[:200]) from exc
        return _parse_fill_response(doc, query, exclude)


def _parse_fill_response(
    doc: object, query: MaskQuery, exclude: tuple[str | None, ...]
) -> list[list[FillCandidate]]:
    excerpt = json.dumps(doc)[:200] if not isinstance(doc, (bytes, str)) else str(doc)[:200]
    if not isinstance(doc, dict) or "candidates" not in doc:
        raise ProtocolError("fill response missing 'candidates'", excerpt)
    outer = doc["candidates"]
    if not isinstance(outer, list) or len(outer) != len(query.mask_indices):
        raise ProtocolError("candidate lists do not align with mask positions", excerpt)
    results: list[list[FillCandidate]] = []
    for pos, items in enumerate(outer):
        if not isinstance(items, list):
            raise ProtocolError("candidate list is not a list", excerpt)
        candidates: list[FillCandidate] = []
        for item in items:
            if not isinstance(item, dict) or "token" not in item or "score" not in item:
                raise ProtocolError("candidate must carry token and score", excerpt)
            token, score = item["token"], item["score"]
            if not isinstance(token, str) or not isinstance(score, (int, float)):
                raise ProtocolError("candidate token/score have wrong types", excerpt)
            try:
                candidate = FillCandidate(token, float(score))
            except ValueError as exc:
                raise ProtocolError(str(exc), excerpt) from exc
            if exclude[pos] is not None and token == exclude[pos]:
                continue  # enforce the exclusion contract at the boundary
            candidates.append(candidate)
        candidates.sort(key=lambda c: -c.score)
        results.append(candidates[: query.top_k])
    return results


def connect_external_filler(endpoint: str, timeout: float = 10.0) -> ExternalFiller:
    return ExternalFiller(endpoint, timeout)
