"""Semi-factual sample generation: entity-level and context-level edits,
ratio-capped pools, and the final mix-up.

Every augmented sentence keeps the exact tag sequence of its origin; only
token texts inside the recorded span change.
"""

from __future__ import annotations

import dataclasses
import json
import random
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Sequence

from .corpus import OUTSIDE, Dataset, Sentence, Token
from .entity_base import EntityBase, sample_replacement
from .errors import ConfigError, InternalError, MissingPoolError
from .fillers import Filler, MaskQuery


class GeneratorKind(Enum):
    ENTITY = "ENTITY"
    CONTEXT = "CONTEXT"


# augmentation ratio ceilings: 1:8 entity-level, 1:5 context-level
RATIO_CAPS = {GeneratorKind.ENTITY: 8, GeneratorKind.CONTEXT: 5}


@dataclass(frozen=True)
class AugmentedSentence:
    sentence: Sentence
    origin_id: str
    kind: GeneratorKind
    edited_span: tuple[int, int]
    replaced_texts: tuple[str, ...]

    def new_texts(self) -> tuple[str, ...]:
        start, end = self.edited_span
        return tuple(t.text for t in self.sentence.tokens[start:end])


def _mix_seed(*parts: int) -> int:
    """FNV-style fold of integer parts into a 32-bit derived seed."""
    h = 0x811C9DC5
    for part in parts:
        h ^= part & 0xFFFFFFFF
        h = (h * 0x01000193) & 0xFFFFFFFF
    return h


def _replace_entity(s: Sentence, position: int, replacement: str) -> AugmentedSentence:
    tokens = list(s.tokens)
    tokens[position] = Token(replacement, tokens[position].tag)
    edited = Sentence(f"{s.id}~entity", tuple(tokens))
    return AugmentedSentence(
        sentence=edited,
        origin_id=s.id,
        kind=GeneratorKind.ENTITY,
        edited_span=(position, position + 1),
        replaced_texts=(s.tokens[position].text,),
    )


def gen_entity_semifact(s: Sentence, base: EntityBase, seed: int) -> AugmentedSentence | None:
    """Swap one seeded-random entity token for a same-tag pool member.

    Returns None when the sentence has no entity token or the pool offers no
    candidate other than the original text.
    """
    positions = [i for i, tok in enumerate(s.tokens) if tok.tag != OUTSIDE]
    if not positions:
        return None
    rng = random.Random(seed)
    position = positions[rng.randrange(len(positions))]
    token = s.tokens[position]
    try:
        replacement = sample_replacement(base, token.tag, token.text, rng.randrange(2**32))
    except MissingPoolError:
        return None
    if replacement is None:
        return None
    return _replace_entity(s, position, replacement)


def _fill_run(s: Sentence, filler: Filler, span_len: int, start: int) -> AugmentedSentence | None:
    """Fill the O-run starting at `start` left to right with top-1 candidates,
    each conditioned on the fills before it; the original text at each
    position is excluded.
    """
    texts = s.texts()
    originals = tuple(texts[start : start + span_len])
    for offset in range(span_len):
        position = start + offset
        query = MaskQuery(
            tokens=tuple(texts),
            mask_indices=(position,),
            top_k=1,
            exclude=(originals[offset],),
        )
        candidates = filler.fill(query)[0]
        if not candidates:
            return None
        texts[position] = candidates[0].token
    tokens = tuple(Token(text, tok.tag) for text, tok in zip(texts, s.tokens))
    edited = Sentence(f"{s.id}~context", tokens)
    return AugmentedSentence(
        sentence=edited,
        origin_id=s.id,
        kind=GeneratorKind.CONTEXT,
        edited_span=(start, start + span_len),
        replaced_texts=originals,
    )


def _context_run_starts(s: Sentence, span_len: int) -> list[int]:
    tags = s.tags()
    return [
        i
        for i in range(len(tags) - span_len + 1)
        if all(tags[i + o] == OUTSIDE for o in range(span_len))
    ]


def gen_context_semifact(
    s: Sentence, filler: Filler, span_len: int, seed: int
) -> AugmentedSentence | None:
    """Mask a seeded-random run of span_len O tokens and infill it.

    Returns None when no O-run of the requested length exists or the filler
    offers no candidate at some position.
    """
    if span_len not in (1, 2):
        raise ValueError("span_len must be 1 or 2")
    starts = _context_run_starts(s, span_len)
    if not starts:
        return None
    rng = random.Random(seed)
    return _fill_run(s, filler, span_len, starts[rng.randrange(len(starts))])


def generate_pool(
    d: Dataset,
    kind: GeneratorKind,
    ratio: int,
    deps: EntityBase | Filler,
    seed: int,
    span_len: int = 1,
    max_ratio: int | None = None,
) -> list[AugmentedSentence]:
    """Up to `ratio` distinct augmented copies per sentence.

    Distinct means a different edited span or different replacement text.
    Copies are drawn with per-copy derived seeds; when seeded draws collide,
    the remaining distinct edits are enumerated in seeded-shuffled order so a
    sentence always contributes min(ratio, number of distinct edits) copies.
    Deterministic per (d, kind, ratio, seed).
    """
    cap = RATIO_CAPS[kind] if max_ratio is None else max_ratio
    if ratio < 0:
        raise ConfigError(f"ratio must be non-negative, got {ratio}")
    if ratio > cap:
        raise ConfigError(f"{kind.value} ratio {ratio} above the cap of {cap}")
    if ratio == 0:
        return []

    pool: list[AugmentedSentence] = []
    for idx, s in enumerate(d.sentences):
        sentence_seed = seed ^ idx
        chosen: dict[tuple[tuple[int, int], tuple[str, ...]], AugmentedSentence] = {}
        for copy in range(ratio):
            if kind is GeneratorKind.ENTITY:
                assert isinstance(deps, EntityBase)
                aug = gen_entity_semifact(s, deps, _mix_seed(sentence_seed, copy))
            else:
                aug = gen_context_semifact(s, deps, span_len, _mix_seed(sentence_seed, copy))
            if aug is not None:
                chosen.setdefault((aug.edited_span, aug.new_texts()), aug)
        if len(chosen) < ratio:
            _top_up(s, kind, deps, span_len, sentence_seed, ratio, chosen)
        for n, aug in enumerate(chosen.values()):
            renamed = dataclasses.replace(
                aug.sentence, id=f"{s.id}~{kind.value.lower()}{n}"
            )
            pool.append(dataclasses.replace(aug, sentence=renamed))
    return pool


def _top_up(
    s: Sentence,
    kind: GeneratorKind,
    deps: EntityBase | Filler,
    span_len: int,
    sentence_seed: int,
    ratio: int,
    chosen: dict[tuple[tuple[int, int], tuple[str, ...]], AugmentedSentence],
) -> None:
    rng = random.Random(_mix_seed(sentence_seed, 0xA5A5A5))
    if kind is GeneratorKind.ENTITY:
        assert isinstance(deps, EntityBase)
        outcomes: list[tuple[int, str]] = []
        for position, tok in enumerate(s.tokens):
            if tok.tag == OUTSIDE:
                continue
            for word in deps.pools.get(tok.tag, ()):
                if word != tok.text:
                    outcomes.append((position, word))
        rng.shuffle(outcomes)
        for position, word in outcomes:
            if len(chosen) >= ratio:
                return
            key = ((position, position + 1), (word,))
            if key not in chosen:
                chosen[key] = _replace_entity(s, position, word)
    else:
        remaining = [
            start
            for start in _context_run_starts(s, span_len)
            if all(span != (start, start + span_len) for span, _ in chosen)
        ]
        rng.shuffle(remaining)
        for start in remaining:
            if len(chosen) >= ratio:
                return
            aug = _fill_run(s, deps, span_len, start)
            if aug is not None:
                chosen.setdefault((aug.edited_span, aug.new_texts()), aug)


def mixup(
    original: Dataset,
    entity_pool: Sequence[AugmentedSentence],
    context_pool: Sequence[AugmentedSentence],
) -> Dataset:
    """Concatenate original ++ context pool ++ entity pool into one dataset.

    Original sentences are retained verbatim; augmented copies get fresh ids
    derived from their origin.
    """
    origin_ids = {s.id for s in original.sentences}
    for aug in list(context_pool) + list(entity_pool):
        if aug.origin_id not in origin_ids:
            raise ValueError(f"augmented sentence origin {aug.origin_id!r} is not in the original dataset")

    sentences = list(original.sentences)
    counters: dict[tuple[str, str], int] = {}
    for pool, suffix in ((context_pool, "ctx"), (entity_pool, "ent")):
        for aug in pool:
            n = counters.get((aug.origin_id, suffix), 0)
            counters[(aug.origin_id, suffix)] = n + 1
            sentences.append(dataclasses.replace(aug.sentence, id=f"{aug.origin_id}~{suffix}{n}"))

    ids = [s.id for s in sentences]
    if len(set(ids)) != len(ids):
        raise InternalError(f"sentence id collision while mixing {original.name!r}")
    return Dataset(f"{original.name}+mix", tuple(sentences), original.scheme)


def save_pool(pool: Sequence[AugmentedSentence], path: str | Path) -> None:
    """One JSON object per augmented sentence."""
    with Path(path).open("w", encoding="utf-8") as fh:
        for aug in pool:
            record = {
                "origin_id": aug.origin_id,
                "kind": aug.kind.value,
                "edited_span": list(aug.edited_span),
                "replaced_texts": list(aug.replaced_texts),
                "tokens": [[t.text, t.tag] for t in aug.sentence.tokens],
            }
            fh.write(json.dumps(record, sort_keys=True) + "\n")


def load_pool(path: str | Path) -> list[AugmentedSentence]:
    pool: list[AugmentedSentence] = []
    with Path(path).open("r", encoding="utf-8") as fh:
        for i, line in enumerate(fh):
            if not line.strip():
                continue
            record = json.loads(line)
            kind = GeneratorKind(record["kind"])
            tokens = tuple(Token(text, tag) for text, tag in record["tokens"])
            sentence = Sentence(f"{record['origin_id']}~{kind.value.lower()}#{i}", tokens)
            pool.append(
                AugmentedSentence(
                    sentence=sentence,
                    origin_id=record["origin_id"],
                    kind=kind,
                    edited_span=tuple(record["edited_span"]),
                    replaced_texts=tuple(record["replaced_texts"]),
                )
            )
    return pool
