"""Shared test helpers: random valid corpora, sequence enumeration, stub
backends, and a tiny threaded HTTP server for the external adapters.
"""

from __future__ import annotations

import json
import random
import threading
from contextlib import contextmanager
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer


from semifact.corpus import (
    OUTSIDE,
    Dataset,
    LabelScheme,
    SchemeKind,
    Sentence,
    Token,
)

BIO2_SCHEME = LabelScheme(SchemeKind.BIO2, ("PER", "LOC", "ORG", "MISC"))
BIOES_SCHEME = LabelScheme(SchemeKind.BIOES, ("PER", "LOC", "ORG", "MISC"))
SMALL_BIO2 = LabelScheme(SchemeKind.BIO2, ("PER", "LOC"))
SMALL_BIOES = LabelScheme(SchemeKind.BIOES, ("PER", "LOC"))

_WORDS = (
    "alpha", "bravo", "carbon", "delta", "ember", "falcon", "grain", "harbor",
    "iris", "jasper", "kelp", "lumen", "meadow", "nectar", "onyx", "pallet",
)
_NAMES = (
    "Avon", "Birk", "Corin", "Dale", "Eris", "Fenth", "Goro", "Hale",
    "Ilsa", "Jona", "Kiva", "Lore", "Mira", "Nolo", "Oren", "Pia",
)


def enumerate_valid_sequences(scheme: LabelScheme, length: int) -> list[list[str]]:
    """All scheme-valid tag sequences of the given length, in lexicographic
    tag-index order, derived directly from the transition rules.
    """
    tags = scheme.full_tags
    out: list[list[str]] = []

    def extend(prefix: list[str]) -> None:
        if len(prefix) == length:
            if scheme.valid_end(prefix[-1]):
                out.append(list(prefix))
            return
        for tag in tags:
            if prefix:
                if not scheme.valid_transition(prefix[-1], tag):
                    continue
            elif not scheme.valid_start(tag):
                continue
            prefix.append(tag)
            extend(prefix)
            prefix.pop()

    extend([])
    return out


def random_valid_tags(scheme: LabelScheme, length: int, rng: random.Random) -> list[str]:
    """A uniformly-ish random scheme-valid tag sequence via a guarded walk."""
    tags = scheme.full_tags
    seq: list[str] = []
    for i in range(length):
        if i == 0:
            options = [t for t in tags if scheme.valid_start(t)]
        else:
            options = [t for t in tags if scheme.valid_transition(seq[-1], t)]
        if i == length - 1:
            options = [t for t in options if scheme.valid_end(t)]
        seq.append(options[rng.randrange(len(options))])
    return seq


def random_sentence(
    scheme: LabelScheme, sid: str, rng: random.Random, min_len: int = 1, max_len: int = 12
) -> Sentence:
    length = rng.randint(min_len, max_len)
    tags = random_valid_tags(scheme, length, rng)
    tokens = []
    for tag in tags:
        if tag == OUTSIDE:
            tokens.append(Token(rng.choice(_WORDS), tag))
        else:
            tokens.append(Token(rng.choice(_NAMES), tag))
    return Sentence(sid, tuple(tokens))


def random_dataset(
    scheme: LabelScheme,
    count: int,
    seed: int,
    name: str = "rand",
    min_len: int = 1,
    max_len: int = 12,
) -> Dataset:
    rng = random.Random(seed)
    sentences = tuple(
        random_sentence(scheme, f"{name}-{i}", rng, min_len, max_len) for i in range(count)
    )
    return Dataset(name, sentences, scheme)


def make_dataset(name: str, rows: list[list[tuple[str, str]]], scheme: LabelScheme) -> Dataset:
    sentences = tuple(
        Sentence(f"{name}-{i}", tuple(Token(text, tag) for text, tag in row))
        for i, row in enumerate(rows)
    )
    return Dataset(name, sentences, scheme)


class GoldStubTagger:
    """Answers with the gold tags it was primed with, keyed by token texts."""

    def __init__(self, sentences):
        self._answers = {tuple(s.texts()): s.tags() for s in sentences}

    def prime(self, sentences):
        for s in sentences:
            self._answers[tuple(s.texts())] = s.tags()

    def predict(self, tokens):
        return list(self._answers[tuple(tokens)])


class AllOutsideTagger:
    def predict(self, tokens):
        return [OUTSIDE] * len(tokens)


class FixedFiller:
    """Always offers the same single candidate (unless excluded)."""

    def __init__(self, token: str, score: float = 1.0):
        self.token = token
        self.score = score

    def fill(self, query):
        from semifact.fillers import FillCandidate

        out = []
        exclude = query.exclude or tuple(None for _ in query.mask_indices)
        for pos, _ in enumerate(query.mask_indices):
            if exclude[pos] == self.token:
                out.append([])
            else:
                out.append([FillCandidate(self.token, self.score)])
        return out


@contextmanager
def http_stub(handler):
    """Serve `handler(path, payload) -> (status, document)` on a loopback
    port; yields the base URL.
    """

    class Handler(BaseHTTPRequestHandler):
        def do_POST(self):
            length = int(self.headers.get("Content-Length", "0"))
            payload = json.loads(self.rfile.read(length) or b"{}")
            status, doc = handler(self.path, payload)
            body = doc if isinstance(doc, bytes) else json.dumps(doc).encode("utf-8")
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        def log_message(self, *args):
            pass

    server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    try:
        yield f"http://127.0.0.1:{server.server_address[1]}"
    finally:
        server.shutdown()
        thread.join(timeout=5)
