"""Entity base: per-tag pools of replacement surface forms.

Pools are keyed by the full tag (B-LOC and I-LOC separately) so replacing a
single token can never invalidate the tag sequence around it.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from pathlib import Path

from .corpus import OUTSIDE, Dataset
from .errors import MissingPoolError


@dataclass(frozen=True)
class EntityBase:
    pools: dict[str, tuple[str, ...]]
    source_names: tuple[str, ...]
    # occurrence counts behind each pool; used for label-word ranking
    counts: dict[str, dict[str, int]] = field(default_factory=dict)

    def __post_init__(self):
        for tag, pool in self.pools.items():
            if tag == OUTSIDE:
                raise ValueError("entity base must not pool the O tag")
            if len(set(pool)) != len(pool):
                raise ValueError(f"pool for {tag} contains duplicates")
            for text in pool:
                if not text or any(c.isspace() for c in text):
                    raise ValueError(f"bad pooled token {text!r} for {tag}")


def build_entity_base(d: Dataset) -> EntityBase:
    """Pool every non-O token text by its full tag, first occurrence first."""
    pools: dict[str, list[str]] = {}
    counts: dict[str, dict[str, int]] = {}
    for s in d.sentences:
        for tok in s.tokens:
            if tok.tag == OUTSIDE:
                continue
            pool = pools.setdefault(tok.tag, [])
            tag_counts = counts.setdefault(tok.tag, {})
            if tok.text not in tag_counts:
                pool.append(tok.text)
            tag_counts[tok.text] = tag_counts.get(tok.text, 0) + 1
    return EntityBase(
        pools={tag: tuple(pool) for tag, pool in pools.items()},
        source_names=(d.name,),
        counts=counts,
    )


def merge_bases(primary: EntityBase, external: EntityBase) -> EntityBase:
    """Per-tag union, primary entries first; counts are summed."""
    pools: dict[str, tuple[str, ...]] = {}
    counts: dict[str, dict[str, int]] = {}
    for tag in list(primary.pools) + [t for t in external.pools if t not in primary.pools]:
        merged = list(primary.pools.get(tag, ()))
        have = set(merged)
        for text in external.pools.get(tag, ()):
            if text not in have:
                merged.append(text)
                have.add(text)
        pools[tag] = tuple(merged)
        tag_counts: dict[str, int] = dict(primary.counts.get(tag, {}))
        for text, n in external.counts.get(tag, {}).items():
            tag_counts[text] = tag_counts.get(text, 0) + n
        counts[tag] = tag_counts
    return EntityBase(
        pools=pools,
        source_names=primary.source_names + external.source_names,
        counts=counts,
    )


def sample_replacement(base: EntityBase, tag: str, exclude: str, seed: int) -> str | None:
    """Seeded uniform draw from the tag's pool, never returning `exclude`.

    Returns None when the pool has no candidate besides the excluded text.
    """
    if tag not in base.pools:
        raise MissingPoolError(tag)
    candidates = [w for w in base.pools[tag] if w != exclude]
    if not candidates:
        return None
    return candidates[random.Random(seed).randrange(len(candidates))]


def save_entity_base(base: EntityBase, path: str | Path) -> None:
    doc = {
        "pools": {tag: list(pool) for tag, pool in base.pools.items()},
        "source_names": list(base.source_names),
        "counts": base.counts,
    }
    Path(path).write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n", "utf-8")


def load_entity_base(path: str | Path) -> EntityBase:
    doc = json.loads(Path(path).read_text("utf-8"))
    pools = {tag: tuple(pool) for tag, pool in doc["pools"].items()}
    counts = doc.get("counts")
    if counts is None:
        # documents written by other tools carry no counts; fall back to 1 each
        counts = {tag: {text: 1 for text in pool} for tag, pool in pools.items()}
    return EntityBase(
        pools=pools,
        source_names=tuple(doc.get("source_names", ())),
        counts={tag: dict(c) for tag, c in counts.items()},
    )
