"""Token-labeled corpus model: CoNLL I/O, scheme conversion, sampling, overlap.

Everything here is an immutable value; operations are pure functions and are
safe to call concurrently.
"""

from __future__ import annotations

import logging
import random
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Iterator, Sequence

from .errors import LabelError, ParseError, SchemeViolationError

log = logging.getLogger(__name__)

OUTSIDE = "O"
DOCSTART = "-DOCSTART-"


class SchemeKind(Enum):
    BIO2 = "BIO2"
    BIOES = "BIOES"


_PREFIXES = {
    SchemeKind.BIO2: ("B", "I"),
    SchemeKind.BIOES: ("B", "I", "E", "S"),
}


@dataclass(frozen=True)
class LabelScheme:
    """Tag alphabet: O plus prefix-type combinations for the scheme kind.

    The order of ``full_tags`` (O first, then prefixes per entity type in
    declaration order) is the canonical tag order used for tie-breaking in
    decoding.
    """

    scheme_kind: SchemeKind
    entity_types: tuple[str, ...]
    full_tags: tuple[str, ...] = field(init=False, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "entity_types", tuple(self.entity_types))
        if not self.entity_types:
            raise ValueError("a label scheme needs at least one entity type")
        if len(set(self.entity_types)) != len(self.entity_types):
            raise ValueError("duplicate entity types")
        for name in self.entity_types:
            if not name or any(c.isspace() for c in name):
                raise ValueError(f"bad entity type name: {name!r}")
        tags = [OUTSIDE]
        for name in self.entity_types:
            tags.extend(f"{p}-{name}" for p in _PREFIXES[self.scheme_kind])
        object.__setattr__(self, "full_tags", tuple(tags))

    def is_valid_tag(self, tag: str) -> bool:
        return tag in self.full_tags

    def split_tag(self, tag: str) -> tuple[str, str] | None:
        """Return (prefix, entity_type), or None for the O tag."""
        if tag == OUTSIDE:
            return None
        prefix, _, etype = tag.partition("-")
        return prefix, etype

    def valid_start(self, tag: str) -> bool:
        if tag == OUTSIDE:
            return True
        prefix = tag.partition("-")[0]
        if self.scheme_kind is SchemeKind.BIO2:
            return prefix == "B"
        return prefix in ("B", "S")

    def valid_transition(self, prev: str, cur: str) -> bool:
        if self.scheme_kind is SchemeKind.BIO2:
            if cur == OUTSIDE or cur.startswith("B-"):
                return True
            # cur is I-X: must continue a chunk of the same type
            etype = cur.partition("-")[2]
            return prev == f"B-{etype}" or prev == f"I-{etype}"
        # BIOES: an open chunk (after B/I) must continue with I/E of its type;
        # otherwise only O, B or S may follow.
        if prev.startswith(("B-", "I-")):
            etype = prev.partition("-")[2]
            return cur == f"I-{etype}" or cur == f"E-{etype}"
        return cur == OUTSIDE or cur.startswith(("B-", "S-"))

    def valid_end(self, tag: str) -> bool:
        if self.scheme_kind is SchemeKind.BIO2:
            return True
        return tag == OUTSIDE or tag.startswith(("E-", "S-"))

    def first_violation(self, tags: Sequence[str]) -> tuple[int, str] | None:
        """Position and description of the first structural violation, if any."""
        if not tags:
            return None
        if not self.valid_start(tags[0]):
            return 0, f"{tags[0]} cannot start a sentence"
        for i in range(1, len(tags)):
            if not self.valid_transition(tags[i - 1], tags[i]):
                return i, f"{tags[i]} cannot follow {tags[i - 1]}"
        if not self.valid_end(tags[-1]):
            return len(tags) - 1, f"{tags[-1]} cannot end a sentence"
        return None


@dataclass(frozen=True)
class Token:
    text: str
    tag: str

    def __post_init__(self):
        if not self.text or any(c.isspace() for c in self.text):
            raise ValueError(f"token text must be non-empty and whitespace-free: {self.text!r}")
        if not self.tag:
            raise ValueError("token tag must be non-empty")


@dataclass(frozen=True)
class Sentence:
    id: str
    tokens: tuple[Token, ...]

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(self.tokens))
        if not self.tokens:
            raise ValueError(f"sentence {self.id!r} has no tokens")

    def __len__(self) -> int:
        return len(self.tokens)

    def texts(self) -> list[str]:
        return [t.text for t in self.tokens]

    def tags(self) -> list[str]:
        return [t.tag for t in self.tokens]

    def validate(self, scheme: LabelScheme) -> None:
        for i, tok in enumerate(self.tokens):
            if not scheme.is_valid_tag(tok.tag):
                raise SchemeViolationError(self.id, i, f"tag {tok.tag!r} not in scheme")
        violation = scheme.first_violation(self.tags())
        if violation is not None:
            raise SchemeViolationError(self.id, violation[0], violation[1])


@dataclass(frozen=True)
class Dataset:
    name: str
    sentences: tuple[Sentence, ...]
    scheme: LabelScheme

    def __post_init__(self):
        object.__setattr__(self, "sentences", tuple(self.sentences))
        ids = Counter(s.id for s in self.sentences)
        if len(ids) != len(self.sentences):
            dup = next(i for i, n in ids.items() if n > 1)
            raise ValueError(f"duplicate sentence id {dup!r} in dataset {self.name!r}")

    def __len__(self) -> int:
        return len(self.sentences)

    def __iter__(self) -> Iterator[Sentence]:
        return iter(self.sentences)

    def validate(self) -> None:
        for s in self.sentences:
            s.validate(self.scheme)


@dataclass(frozen=True)
class EntitySpan:
    entity_type: str
    start: int
    end: int


def parse_conll(data: bytes | str, scheme: LabelScheme, name: str = "corpus") -> Dataset:
    """Parse CoNLL-style text: one token per line, tag in the last field,
    blank lines between sentences, -DOCSTART- lines skipped.

    Extra middle columns (POS, chunk, ...) are ignored.
    """
    text = data.decode("utf-8") if isinstance(data, bytes) else data
    sentences: list[Sentence] = []
    block: list[Token] = []

    def flush() -> None:
        if not block:
            return
        sid = f"{name}-{len(sentences)}"
        sentence = Sentence(sid, tuple(block))
        violation = scheme.first_violation(sentence.tags())
        if violation is not None:
            raise SchemeViolationError(sid, violation[0], violation[1])
        sentences.append(sentence)
        block.clear()

    for line_no, raw in enumerate(text.split("\n"), start=1):
        fields = raw.split()
        if not fields:
            flush()
            continue
        if fields[0] == DOCSTART:
            continue
        if len(fields) < 2:
            raise ParseError(line_no, f"expected at least token and tag, got {raw!r}")
        tag = fields[-1]
        if not scheme.is_valid_tag(tag):
            raise LabelError(line_no, tag)
        block.append(Token(fields[0], tag))
    flush()
    return Dataset(name, tuple(sentences), scheme)


def read_conll(path: str | Path, scheme: LabelScheme, name: str | None = None) -> Dataset:
    path = Path(path)
    return parse_conll(path.read_bytes(), scheme, name=name or path.stem)


def write_conll(d: Dataset) -> bytes:
    """Serialize to the canonical form: "token tag" lines, one blank line
    between sentences, trailing newline. parse_conll inverts this exactly.
    """
    blocks = ["\n".join(f"{t.text} {t.tag}" for t in s.tokens) for s in d.sentences]
    if not blocks:
        return b""
    return ("\n\n".join(blocks) + "\n").encode("utf-8")


def write_conll_file(d: Dataset, path: str | Path) -> None:
    Path(path).write_bytes(write_conll(d))


def extract_spans_from_tags(tags: Sequence[str]) -> list[EntitySpan]:
    """Maximal entity chunks, left to right.

    Defined for any sequence of well-formed tags; on scheme-valid input this
    matches the strict chunk semantics, and stray continuations (I/E without
    an open chunk of the same type) are treated as chunk starts.
    """
    spans: list[EntitySpan] = []
    open_type: str | None = None
    open_start = 0

    def close(end: int) -> None:
        nonlocal open_type
        if open_type is not None:
            spans.append(EntitySpan(open_type, open_start, end))
            open_type = None

    for i, tag in enumerate(tags):
        if tag == OUTSIDE:
            close(i)
            continue
        prefix, _, etype = tag.partition("-")
        if prefix == "B":
            close(i)
            open_type, open_start = etype, i
        elif prefix == "S":
            close(i)
            spans.append(EntitySpan(etype, i, i + 1))
        elif prefix == "I":
            if open_type != etype:
                close(i)
                open_type, open_start = etype, i
        elif prefix == "E":
            if open_type == etype:
                close(i + 1)
            else:
                close(i)
                spans.append(EntitySpan(etype, i, i + 1))
        else:
            raise ValueError(f"unrecognized tag {tag!r}")
    close(len(tags))
    return spans


def extract_spans(s: Sentence) -> list[EntitySpan]:
    return extract_spans_from_tags(s.tags())


def convert_scheme(d: Dataset, target: LabelScheme) -> Dataset:
    """Re-express all tag sequences in the target scheme kind.

    Entity spans are preserved exactly; only the prefix vocabulary changes.
    """
    if target.entity_types != d.scheme.entity_types:
        raise ValueError("target scheme must differ only in scheme kind")
    converted: list[Sentence] = []
    for s in d.sentences:
        tags = _tags_for_spans(extract_spans(s), len(s), target.scheme_kind)
        tokens = tuple(Token(t.text, tag) for t, tag in zip(s.tokens, tags))
        converted.append(Sentence(s.id, tokens))
    return Dataset(d.name, tuple(converted), target)


def _tags_for_spans(spans: Iterable[EntitySpan], length: int, kind: SchemeKind) -> list[str]:
    tags = [OUTSIDE] * length
    for span in spans:
        if kind is SchemeKind.BIO2:
            tags[span.start] = f"B-{span.entity_type}"
            for i in range(span.start + 1, span.end):
                tags[i] = f"I-{span.entity_type}"
        else:
            if span.end - span.start == 1:
                tags[span.start] = f"S-{span.entity_type}"
            else:
                tags[span.start] = f"B-{span.entity_type}"
                for i in range(span.start + 1, span.end - 1):
                    tags[i] = f"I-{span.entity_type}"
                tags[span.end - 1] = f"E-{span.entity_type}"
    return tags


def remap_unseen_labels(d: Dataset, known: LabelScheme) -> Dataset:
    """Set every entity span whose type is unknown to O, atomically per span."""
    known_types = set(known.entity_types)
    out_scheme = LabelScheme(d.scheme.scheme_kind, known.entity_types)
    remapped: list[Sentence] = []
    for s in d.sentences:
        tags = s.tags()
        for span in extract_spans(s):
            if span.entity_type not in known_types:
                for i in range(span.start, span.end):
                    tags[i] = OUTSIDE
        tokens = tuple(Token(t.text, tag) for t, tag in zip(s.tokens, tags))
        sentence = Sentence(s.id, tokens)
        sentence.validate(out_scheme)
        remapped.append(sentence)
    return Dataset(d.name, tuple(remapped), out_scheme)


def sample_few_shot(d: Dataset, k: int, seed: int) -> Dataset:
    """Greedy covering sample: repeatedly extend the entity type with the
    lowest sentence count by a seeded-random unused sentence containing it,
    until every type has at least k sentences or its pool is exhausted.

    The result is a subsequence of the input, deterministic per (d, k, seed).
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    types = d.scheme.entity_types
    type_order = {t: i for i, t in enumerate(types)}
    types_of: list[set[str]] = []
    pools: dict[str, list[int]] = {t: [] for t in types}
    for idx, s in enumerate(d.sentences):
        present = {span.entity_type for span in extract_spans(s)}
        types_of.append(present)
        for t in present:
            pools[t].append(idx)

    rng = random.Random(seed)
    counts = {t: 0 for t in types}
    selected: set[int] = set()
    done: set[str] = set()
    for t in types:
        if not pools[t]:
            log.warning("few-shot sampling: no sentence supports type %s", t)
            done.add(t)

    while True:
        open_types = [t for t in types if t not in done and counts[t] < k]
        if not open_types:
            break
        t = min(open_types, key=lambda x: (counts[x], type_order[x]))
        pool = pools[t] = [i for i in pools[t] if i not in selected]
        if not pool:
            if counts[t] < k:
                log.warning(
                    "few-shot sampling: type %s under-covered (%d < %d)", t, counts[t], k
                )
            done.add(t)
            continue
        chosen = pool[rng.randrange(len(pool))]
        selected.add(chosen)
        for present in types_of[chosen]:
            counts[present] += 1

    kept = tuple(s for i, s in enumerate(d.sentences) if i in selected)
    return Dataset(f"{d.name}-{k}shot", kept, d.scheme)


def vocab_overlap(a: Dataset, b: Dataset, top_n: int, stopwords: frozenset[str] | set[str]) -> float:
    """Overlap of the top_n most frequent lowercased non-stopword texts,
    normalized by the smaller vocabulary: |Va ∩ Vb| / min(|Va|, |Vb|).
    """
    if top_n < 1:
        raise ValueError("top_n must be >= 1")

    def top_words(d: Dataset) -> set[str]:
        counts = Counter(
            t.text.lower() for s in d.sentences for t in s.tokens if t.text.lower() not in stopwords
        )
        if not counts:
            raise ValueError(f"corpus {d.name!r} has no non-stopword tokens")
        ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
        return {w for w, _ in ranked[:top_n]}

    va, vb = top_words(a), top_words(b)
    return len(va & vb) / min(len(va), len(vb))


def load_stopwords(path: str | Path) -> frozenset[str]:
    """One word per line, UTF-8; blank lines ignored; lowercased."""
    words = []
    for line in Path(path).read_text("utf-8").splitlines():
        word = line.strip().lower()
        if word:
            words.append(word)
    return frozenset(words)


def detect_scheme(data: bytes | str) -> LabelScheme:
    """Infer a label scheme from raw CoNLL text: entity types are collected
    from the last fields (sorted), and the kind is BIOES iff E-/S- occur.
    """
    text = data.decode("utf-8") if isinstance(data, bytes) else data
    types: set[str] = set()
    kind = SchemeKind.BIO2
    for raw in text.split("\n"):
        fields = raw.split()
        if not fields or fields[0] == DOCSTART or len(fields) < 2:
            continue
        tag = fields[-1]
        if tag == OUTSIDE:
            continue
        prefix, _, etype = tag.partition("-")
        if etype:
            types.add(etype)
            if prefix in ("E", "S"):
                kind = SchemeKind.BIOES
    if not types:
        raise ValueError("no entity tags found; cannot infer a scheme")
    return LabelScheme(kind, tuple(sorted(types)))
