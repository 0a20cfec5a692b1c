"""Denoising filters: drop augmented samples a tagger trained on the
original data cannot reproduce.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Sequence

from .augment import AugmentedSentence, GeneratorKind


def filter_strict(
    pool: Sequence[AugmentedSentence], oracle
) -> tuple[list[AugmentedSentence], list[dict]]:
    """Keep a sample iff the oracle reproduces its full tag sequence.

    Returns (kept pool in input order, rejection records). Each rejection
    carries the first mismatching position.
    """
    kept: list[AugmentedSentence] = []
    rejections: list[dict] = []
    for aug in pool:
        gold = aug.sentence.tags()
        pred = oracle.predict(aug.sentence.texts())
        mismatch = next((i for i in range(len(gold)) if gold[i] != pred[i]), None)
        if mismatch is None:
            kept.append(aug)
        else:
            rejections.append(
                {
                    "id": aug.sentence.id,
                    "position": mismatch,
                    "expected": gold[mismatch],
                    "predicted": pred[mismatch],
                }
            )
    return kept, rejections


def filter_entity_only(
    pool: Sequence[AugmentedSentence], oracle
) -> tuple[list[AugmentedSentence], list[dict]]:
    """Baseline filter: reject only entity-level samples whose edited span is
    mispredicted; context-level samples pass unconditionally.
    """
    kept: list[AugmentedSentence] = []
    rejections: list[dict] = []
    for aug in pool:
        if aug.kind is GeneratorKind.CONTEXT:
            kept.append(aug)
            continue
        gold = aug.sentence.tags()
        pred = oracle.predict(aug.sentence.texts())
        start, end = aug.edited_span
        mismatch = next((i for i in range(start, end) if gold[i] != pred[i]), None)
        if mismatch is None:
            kept.append(aug)
        else:
            rejections.append(
                {
                    "id": aug.sentence.id,
                    "position": mismatch,
                    "expected": gold[mismatch],
                    "predicted": pred[mismatch],
                }
            )
    return kept, rejections


def write_rejections(rejections: Sequence[dict], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for record in rejections:
            fh.write(json.dumps(record, sort_keys=True) + "\n")
