"""Prompt-target construction: label-word maps, replaced-token sequences for
template-free tuning, template rendering, and the replaced-LM loss.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

from .corpus import OUTSIDE, Dataset, Sentence
from .entity_base import EntityBase
from .errors import MissingLabelWordError

X_SLOT = "[X]"
Z_SLOT = "[Z]"

ProbabilityProvider = Callable[[Sequence[str], int, str], float]


@dataclass(frozen=True)
class LabelWordMap:
    words: dict[str, str]
    source: str  # "explicit" or "frequency-derived"

    def __post_init__(self):
        for tag, word in self.words.items():
            if tag == OUTSIDE:
                raise ValueError("label words are only defined for entity tags")
            if not word or any(c.isspace() for c in word):
                raise ValueError(f"bad label word {word!r} for {tag}")
        values = list(self.words.values())
        if len(set(values)) != len(values):
            raise ValueError("label word map must be injective")

    def word_for(self, tag: str) -> str:
        if tag not in self.words:
            raise MissingLabelWordError([tag])
        return self.words[tag]


def build_label_word_map(base: EntityBase) -> LabelWordMap:
    """Most frequent pooled token per tag; frequency ties break
    lexicographically, and a collision with an already-assigned word falls
    through to the tag's next-ranked token.

    Tags are processed in sorted order so the assignment is deterministic.
    """
    if not base.pools:
        raise ValueError("cannot derive label words from an empty entity base")
    words: dict[str, str] = {}
    taken: set[str] = set()
    missing: list[str] = []
    for tag in sorted(base.pools):
        pool = base.pools[tag]
        if not pool:
            missing.append(tag)
            continue
        tag_counts = base.counts.get(tag, {})
        ranked = sorted(pool, key=lambda w: (-tag_counts.get(w, 1), w))
        choice = next((w for w in ranked if w not in taken), None)
        if choice is None:
            missing.append(tag)
            continue
        words[tag] = choice
        taken.add(choice)
    if missing:
        raise MissingLabelWordError(missing)
    return LabelWordMap(words, "frequency-derived")


def explicit_label_word_map(words: dict[str, str]) -> LabelWordMap:
    return LabelWordMap(dict(words), "explicit")


def build_entlm_target(s: Sentence, m: LabelWordMap) -> list[str]:
    """The replaced sequence: entity positions carry their tag's label word,
    O positions keep the original text. Length is preserved.
    """
    uncovered = sorted({t.tag for t in s.tokens if t.tag != OUTSIDE and t.tag not in m.words})
    if uncovered:
        raise MissingLabelWordError(uncovered)
    return [m.words[t.tag] if t.tag != OUTSIDE else t.text for t in s.tokens]


@dataclass(frozen=True)
class PromptTemplate:
    segments: tuple[str, ...]

    def __post_init__(self):
        if sum(1 for seg in self.segments if seg == X_SLOT) != 1:
            raise ValueError(f"a template needs exactly one {X_SLOT} slot")
        if not any(seg == Z_SLOT for seg in self.segments):
            raise ValueError(f"a template needs at least one {Z_SLOT} slot")

    @classmethod
    def parse(cls, text: str) -> "PromptTemplate":
        parts = re.split(r"(\[[XZ]\])", text)
        return cls(tuple(p for p in parts if p))

    def text(self) -> str:
        return "".join(self.segments)


def render_template(t: PromptTemplate, s: Sentence) -> str:
    """Fill the input slot with the space-joined tokens; mask slots stay as
    literal markers for the downstream model.
    """
    filled = " ".join(s.texts())
    return "".join(filled if seg == X_SLOT else seg for seg in t.segments)


def load_template(path: str | Path) -> PromptTemplate:
    return PromptTemplate.parse(Path(path).read_text("utf-8").strip())


def score_replm(
    x: Sequence[str], x_rep: Sequence[str], probs: ProbabilityProvider
) -> float:
    """Negative log-likelihood of the replaced sequence under the provider:
    -sum_i log P(x_rep[i] | x). Lower is better; zero iff every probability
    is 1.
    """
    if len(x) != len(x_rep):
        raise ValueError("x and x_rep must have the same length")
    total = 0.0
    for i, target in enumerate(x_rep):
        p = probs(x, i, target)
        if not 0.0 < p <= 1.0:
            raise ValueError(f"probability out of (0, 1] at position {i}: {p!r}")
        total -= math.log(p)
    return total


def write_entlm_targets(d: Dataset, m: LabelWordMap, path: str | Path) -> None:
    """One JSON object per sentence: {"id", "x", "x_rep"}."""
    with Path(path).open("w", encoding="utf-8") as fh:
        for s in d.sentences:
            record = {"id": s.id, "x": s.texts(), "x_rep": build_entlm_target(s, m)}
            fh.write(json.dumps(record, sort_keys=True) + "\n")
