"""Reference sequence tagger: averaged structured perceptron with Viterbi
decoding, span-level micro-F1 evaluation, and an adapter for external tagging
services.
"""

from __future__ import annotations

import json
import random
import time
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Sequence

import requests

from .corpus import (
    Dataset,
    EntitySpan,
    LabelScheme,
    SchemeKind,
    Sentence,
    extract_spans,
    extract_spans_from_tags,
)
from .errors import ProtocolError, TransportError

FEATURE_VERSION = 1
MODEL_FORMAT_VERSION = 1

_NEG_INF = float("-inf")


def word_shape(text: str) -> str:
    return "".join(
        "X" if c.isupper() else "x" if c.islower() else "d" if c.isdigit() else c for c in text
    )


def token_features(texts: Sequence[str], i: int) -> list[str]:
    """Feature strings for position i: lowercased word, shape, affixes of
    length 1-3, and lowercased neighbors with <BOS>/<EOS> boundary markers.

    The template set is frozen (FEATURE_VERSION) so persisted models stay
    reproducible.
    """
    if not 0 <= i < len(texts):
        raise ValueError(f"position {i} out of bounds")
    word = texts[i]
    lower = word.lower()
    feats = [f"w={lower}", f"shape={word_shape(word)}"]
    for k in (1, 2, 3):
        if len(lower) >= k:
            feats.append(f"pre{k}={lower[:k]}")
            feats.append(f"suf{k}={lower[-k:]}")
    feats.append(f"prev={texts[i - 1].lower() if i > 0 else '<BOS>'}")
    feats.append(f"next={texts[i + 1].lower() if i + 1 < len(texts) else '<EOS>'}")
    return feats


def featurize(s: Sentence, i: int) -> list[str]:
    return token_features(s.texts(), i)


@dataclass
class TaggerModel:
    scheme: LabelScheme
    feature_weights: dict[tuple[str, str], float] = field(default_factory=dict)
    transition_weights: dict[tuple[str, str], float] = field(default_factory=dict)
    averaged: bool = False

    def predict(self, tokens: Sequence[str]) -> list[str]:
        return predict(self, tokens)


@lru_cache(maxsize=None)
def _decode_tables(scheme: LabelScheme) -> tuple[tuple[int, ...], tuple[tuple[int, ...], ...], tuple[int, ...]]:
    """(start states, allowed previous states per state, end states), as tag
    indices in scheme order. Scheme-invalid moves are simply absent, which is
    how the structural -inf transition weights are realized.
    """
    tags = scheme.full_tags
    starts = tuple(i for i, t in enumerate(tags) if scheme.valid_start(t))
    allowed_prev = tuple(
        tuple(p for p, pt in enumerate(tags) if scheme.valid_transition(pt, ct))
        for ct in tags
    )
    ends = tuple(i for i, t in enumerate(tags) if scheme.valid_end(t))
    return starts, allowed_prev, ends


def _viterbi(
    scheme: LabelScheme,
    feats: Sequence[Sequence[str]],
    feature_weights: dict[tuple[str, str], float],
    transition_weights: dict[tuple[str, str], float],
) -> list[str]:
    tags = scheme.full_tags
    n = len(feats)
    starts, allowed_prev, ends = _decode_tables(scheme)

    emit = [
        [sum(feature_weights.get((f, tag), 0.0) for f in feats[i]) for tag in tags]
        for i in range(n)
    ]

    best = [[_NEG_INF] * len(tags) for _ in range(n)]
    back = [[-1] * len(tags) for _ in range(n)]
    for t in starts:
        best[0][t] = emit[0][t]
    for i in range(1, n):
        prev_row = best[i - 1]
        for cur in range(len(tags)):
            top, arg = _NEG_INF, -1
            for prev in allowed_prev[cur]:
                base = prev_row[prev]
                if base == _NEG_INF:
                    continue
                score = base + transition_weights.get((tags[prev], tags[cur]), 0.0)
                if score > top:  # strict: ties keep the lowest tag index
                    top, arg = score, prev
            if arg >= 0:
                best[i][cur] = top + emit[i][cur]
                back[i][cur] = arg

    final, final_score = -1, _NEG_INF
    candidates = ends if n > 1 else tuple(t for t in ends if t in starts)
    for t in candidates:
        if best[n - 1][t] > final_score:
            final_score, final = best[n - 1][t], t
    path = [final]
    for i in range(n - 1, 0, -1):
        path.append(back[i][path[-1]])
    path.reverse()
    return [tags[t] for t in path]


def predict(model: TaggerModel, tokens: Sequence[str]) -> list[str]:
    """Highest-scoring scheme-valid tag sequence; ties broken toward the
    earliest tags in scheme order, resolved from the last position backwards.
    """
    if not tokens:
        raise ValueError("cannot tag an empty token list")
    texts = list(tokens)
    feats = [token_features(texts, i) for i in range(len(texts))]
    return _viterbi(model.scheme, feats, model.feature_weights, model.transition_weights)


def train(d: Dataset, epochs: int, seed: int) -> TaggerModel:
    """Averaged structured perceptron.

    Per sentence: Viterbi-decode under the working weights; on a mismatch add
    +1 to the gold (feature, tag) and internal transition weights and -1 to
    the predicted ones. The returned model carries the average of the working
    weights over all sentence visits. Deterministic per (d, epochs, seed).
    """
    if epochs < 1:
        raise ValueError("epochs must be >= 1")
    if not d.sentences:
        raise ValueError("cannot train on an empty dataset")

    scheme = d.scheme
    cached = [
        ([token_features(s.texts(), i) for i in range(len(s))], s.tags())
        for s in d.sentences
    ]

    weights_f: dict[tuple[str, str], float] = {}
    weights_t: dict[tuple[str, str], float] = {}
    acc_f: dict[tuple[str, str], float] = {}
    acc_t: dict[tuple[str, str], float] = {}
    since_f: dict[tuple[str, str], int] = {}
    since_t: dict[tuple[str, str], int] = {}

    def bump(weights, acc, since, key, delta, step):
        current = weights.get(key, 0.0)
        acc[key] = acc.get(key, 0.0) + current * (step - since.get(key, 1))
        since[key] = step
        weights[key] = current + delta

    rng = random.Random(seed)
    order = list(range(len(cached)))
    step = 0
    for _ in range(epochs):
        rng.shuffle(order)
        for si in order:
            step += 1
            feats, gold = cached[si]
            pred = _viterbi(scheme, feats, weights_f, weights_t)
            if pred == gold:
                continue
            for i, fs in enumerate(feats):
                if gold[i] == pred[i]:
                    continue
                for f in fs:
                    bump(weights_f, acc_f, since_f, (f, gold[i]), 1.0, step)
                    bump(weights_f, acc_f, since_f, (f, pred[i]), -1.0, step)
            for i in range(1, len(gold)):
                gold_pair = (gold[i - 1], gold[i])
                pred_pair = (pred[i - 1], pred[i])
                if gold_pair == pred_pair:
                    continue
                bump(weights_t, acc_t, since_t, gold_pair, 1.0, step)
                bump(weights_t, acc_t, since_t, pred_pair, -1.0, step)

    def averaged(weights, acc, since):
        out: dict[tuple[str, str], float] = {}
        for key, w in weights.items():
            total = acc.get(key, 0.0) + w * (step + 1 - since.get(key, 1))
            mean = total / step
            if mean != 0.0:
                out[key] = mean
        return out

    return TaggerModel(
        scheme=scheme,
        feature_weights=averaged(weights_f, acc_f, since_f),
        transition_weights=averaged(weights_t, acc_t, since_t),
        averaged=True,
    )


@dataclass(frozen=True)
class TypeScore:
    precision: float
    recall: float
    f1: float
    tp: int
    fp: int
    fn: int


@dataclass(frozen=True)
class EvalReport:
    precision: float
    recall: float
    micro_f1: float
    tp: int
    fp: int
    fn: int
    per_type: dict[str, TypeScore]

    def to_dict(self) -> dict:
        return {
            "precision": self.precision,
            "recall": self.recall,
            "micro_f1": self.micro_f1,
            "tp": self.tp,
            "fp": self.fp,
            "fn": self.fn,
            "per_type": {
                t: {
                    "precision": s.precision,
                    "recall": s.recall,
                    "f1": s.f1,
                    "tp": s.tp,
                    "fp": s.fp,
                    "fn": s.fn,
                }
                for t, s in sorted(self.per_type.items())
            },
        }


def _prf(tp: int, fp: int, fn: int) -> tuple[float, float, float]:
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f1


def evaluate(model, d: Dataset) -> EvalReport:
    """Span-level micro-F1: an exact (type, start, end) match counts as a
    true positive; 0/0 ratios are defined as 0.
    """
    if not d.sentences:
        raise ValueError("cannot evaluate on an empty dataset")
    tp: dict[str, int] = {}
    fp: dict[str, int] = {}
    fn: dict[str, int] = {}
    for s in d.sentences:
        gold = set(extract_spans(s))
        pred = set(extract_spans_from_tags(model.predict(s.texts())))
        for span in gold & pred:
            tp[span.entity_type] = tp.get(span.entity_type, 0) + 1
        for span in pred - gold:
            fp[span.entity_type] = fp.get(span.entity_type, 0) + 1
        for span in gold - pred:
            fn[span.entity_type] = fn.get(span.entity_type, 0) + 1

    per_type: dict[str, TypeScore] = {}
    for etype in sorted(set(tp) | set(fp) | set(fn)):
        t, f, m = tp.get(etype, 0), fp.get(etype, 0), fn.get(etype, 0)
        p, r, f1 = _prf(t, f, m)
        per_type[etype] = TypeScore(p, r, f1, t, f, m)

    total_tp, total_fp, total_fn = sum(tp.values()), sum(fp.values()), sum(fn.values())
    precision, recall, micro = _prf(total_tp, total_fp, total_fn)
    return EvalReport(precision, recall, micro, total_tp, total_fp, total_fn, per_type)


class ExternalTagger:
    """Adapter for a tagging service: POST {endpoint}/tag with {"tokens"},
    expect {"tags"}; answers are validated against the scheme (membership and
    transition structure) before use.
    """

    def __init__(self, endpoint: str, scheme: LabelScheme, timeout: float):
        self.endpoint = endpoint.rstrip("/")
        self.scheme = scheme
        self.timeout = timeout

    def predict(self, tokens: Sequence[str]) -> list[str]:
        start = time.monotonic()
        try:
            response = requests.post(
                f"{self.endpoint}/tag", json={"tokens": list(tokens)}, timeout=self.timeout
            )
        except requests.RequestException as exc:
            raise TransportError(self.endpoint, time.monotonic() - start, str(exc)) from exc
        if response.status_code != 200:
            raise ProtocolError(
                f"tag service answered HTTP {response.status_code}", response.text[:200]
            )
        try:
            doc = response.json()
        except ValueError as exc:
            raise ProtocolError("tag response is not JSON", response.text[:200]) from exc
        excerpt = json.dumps(doc)[:200]
        if not isinstance(doc, dict) or not isinstance(doc.get("tags"), list):
            raise ProtocolError("tag response missing 'tags' list", excerpt)
        tags = doc["tags"]
        if len(tags) != len(tokens):
            raise ProtocolError("tag list does not align with tokens", excerpt)
        for tag in tags:
            if not isinstance(tag, str) or not self.scheme.is_valid_tag(tag):
                raise ProtocolError(f"tag {tag!r} is not in the scheme", excerpt)
        violation = self.scheme.first_violation(tags)
        if violation is not None:
            raise ProtocolError(f"invalid tag sequence: {violation[1]}", excerpt)
        return list(tags)


def connect_external_tagger(endpoint: str, scheme: LabelScheme, timeout: float = 10.0) -> ExternalTagger:
    return ExternalTagger(endpoint, scheme, timeout)


def save_model(model: TaggerModel, path: str | Path) -> None:
    doc = {
        "format_version": MODEL_FORMAT_VERSION,
        "feature_version": FEATURE_VERSION,
        "averaged": model.averaged,
        "scheme": {
            "kind": model.scheme.scheme_kind.value,
            "entity_types": list(model.scheme.entity_types),
        },
        "features": sorted(
            [feat, tag, weight] for (feat, tag), weight in model.feature_weights.items()
        ),
        "transitions": sorted(
            [prev, cur, weight] for (prev, cur), weight in model.transition_weights.items()
        ),
    }
    Path(path).write_text(json.dumps(doc, sort_keys=True, indent=1) + "\n", "utf-8")


def load_model(path: str | Path) -> TaggerModel:
    doc = json.loads(Path(path).read_text("utf-8"))
    if doc.get("format_version") != MODEL_FORMAT_VERSION:
        raise ValueError(f"unsupported model format: {doc.get('format_version')!r}")
    scheme = LabelScheme(SchemeKind(doc["scheme"]["kind"]), tuple(doc["scheme"]["entity_types"]))
    return TaggerModel(
        scheme=scheme,
        feature_weights={(f, t): w for f, t, w in doc["features"]},
        transition_weights={(p, c): w for p, c, w in doc["transitions"]},
        averaged=bool(doc.get("averaged", False)),
    )


def spans_to_set(spans: Sequence[EntitySpan]) -> set[tuple[str, int, int]]:
    return {(s.entity_type, s.start, s.end) for s in spans}
