"""Synthetic two-domain corpus generator for desk-scale experiments.

Builds a source news-like domain and a vocabulary-shifted target domain that
share entity surface forms but use disjoint context words, plus the side
files an augmentation run wants: an external entity base harvested from the
full source training split and a stopword list of the shared function words.
"""

from __future__ import annotations

import random
from pathlib import Path

from .corpus import Dataset, LabelScheme, SchemeKind, Sentence, Token, write_conll_file
from .entity_base import build_entity_base, save_entity_base

ENTITY_TYPES = ("PER", "LOC", "ORG")

# function words shared by both domains; these are also the stopword list
FUNCTION_WORDS = ("the", "a", "in", "on", "of", "at", "for", "with")

_SYLLABLES = (
    "ba", "be", "bo", "da", "de", "do", "ga", "ge", "go", "ka", "ke", "ko",
    "la", "le", "lo", "ma", "me", "mo", "na", "ne", "no", "ra", "re", "ro",
    "sa", "se", "so", "ta", "te", "to", "va", "ve", "vo", "za", "zi", "zu",
)


def _coin_words(rng: random.Random, count: int, taken: set[str], capital: bool = False) -> list[str]:
    words: list[str] = []
    while len(words) < count:
        word = "".join(rng.choice(_SYLLABLES) for _ in range(rng.randint(2, 3)))
        if capital:
            word = word.capitalize()
        if word not in taken:
            taken.add(word)
            words.append(word)
    return words


class DomainSpec:
    """Vocabulary bundle for one domain."""

    def __init__(
        self,
        entity_forms: dict[str, list[str]],
        context_words: list[str],
        confusers: list[str],
        slot_words: list[str],
        triggers: dict[str, list[str]],
        confuser_rate: float = 0.15,
    ):
        self.entity_forms = entity_forms
        self.context_words = context_words
        self.confusers = confusers  # capitalized O words: shape looks entity-like
        self.slot_words = slot_words  # lowercase words a confuser always follows
        self.triggers = triggers  # per-type O words that precede entity mentions
        self.confuser_rate = confuser_rate


def _make_sentence(rng: random.Random, sid: str, domain: DomainSpec) -> Sentence:
    tokens: list[Token] = []

    def context_stretch(low: int, high: int) -> None:
        for _ in range(rng.randint(low, high)):
            roll = rng.random()
            if roll < domain.confuser_rate:
                # date-like construction: a capitalized non-entity in a
                # predictable lowercase collocation slot
                tokens.append(Token(rng.choice(domain.slot_words), "O"))
                tokens.append(Token(rng.choice(domain.confusers), "O"))
            elif roll < domain.confuser_rate + 0.25:
                tokens.append(Token(rng.choice(FUNCTION_WORDS), "O"))
            else:
                tokens.append(Token(rng.choice(domain.context_words), "O"))

    context_stretch(1, 2)
    if rng.random() < 0.85:
        for _ in range(rng.randint(1, 2)):
            etype = rng.choice(ENTITY_TYPES)
            tokens.append(Token(rng.choice(domain.triggers[etype]), "O"))
            forms = domain.entity_forms[etype]
            tokens.append(Token(rng.choice(forms), f"B-{etype}"))
            if rng.random() < 0.3:
                tokens.append(Token(rng.choice(forms), f"I-{etype}"))
            context_stretch(1, 2)
    context_stretch(0, 1)
    return Sentence(sid, tuple(tokens))


def _make_corpus(name: str, count: int, domain: DomainSpec, rng: random.Random) -> Dataset:
    scheme = LabelScheme(SchemeKind.BIO2, ENTITY_TYPES)
    sentences = tuple(_make_sentence(rng, f"{name}-{i}", domain) for i in range(count))
    return Dataset(name, sentences, scheme)


def build_synthetic_suite(
    out_dir: str | Path,
    seed: int = 7,
    train_sentences: int = 200,
    dev_sentences: int = 80,
    test_sentences: int = 80,
    target_sentences: int = 240,
) -> dict[str, Path]:
    """Write the full two-domain suite and return the paths, keyed by role.

    Source and target share the master entity lists (the target also uses
    forms the source training split never mentions) while context words,
    trigger words, and capitalized confusers are disjoint between domains.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = random.Random(f"synth-vocab-{seed}")
    taken: set[str] = set(FUNCTION_WORDS)

    master = {t: _coin_words(rng, 16, taken, capital=True) for t in ENTITY_TYPES}
    source = DomainSpec(
        entity_forms={t: master[t][:12] for t in ENTITY_TYPES},
        context_words=_coin_words(rng, 36, taken),
        confusers=_coin_words(rng, 10, taken, capital=True),
        slot_words=_coin_words(rng, 3, taken),
        triggers={t: _coin_words(rng, 2, taken) for t in ENTITY_TYPES},
    )
    # the target reuses the entity inventory (plus a few unseen forms) but
    # none of the context words, triggers, confusers, or collocation slots
    target = DomainSpec(
        entity_forms=master,
        context_words=_coin_words(rng, 36, taken),
        confusers=_coin_words(rng, 10, taken, capital=True),
        slot_words=_coin_words(rng, 3, taken),
        triggers={t: _coin_words(rng, 2, taken) for t in ENTITY_TYPES},
        confuser_rate=0.15,
    )

    corpora = {
        "source_train": _make_corpus(
            "source_train", train_sentences, source, random.Random(f"synth-train-{seed}")
        ),
        "source_dev": _make_corpus(
            "source_dev", dev_sentences, source, random.Random(f"synth-dev-{seed}")
        ),
        "source_test": _make_corpus(
            "source_test", test_sentences, source, random.Random(f"synth-test-{seed}")
        ),
        "target_test": _make_corpus(
            "target_test", target_sentences, target, random.Random(f"synth-target-{seed}")
        ),
    }

    paths: dict[str, Path] = {}
    for role, dataset in corpora.items():
        path = out / f"{role}.conll"
        write_conll_file(dataset, path)
        paths[role] = path

    base_path = out / "entity_base.json"
    save_entity_base(build_entity_base(corpora["source_train"]), base_path)
    paths["entity_base"] = base_path

    stopword_path = out / "stopwords.txt"
    stopword_path.write_text("\n".join(FUNCTION_WORDS) + "\n", "utf-8")
    paths["stopwords"] = stopword_path
    return paths
