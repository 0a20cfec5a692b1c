"""End-to-end orchestration: augmentation runs, ratio grid search, and
multi-corpus evaluation, all deterministic per configuration.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .augment import GeneratorKind, generate_pool, mixup, save_pool
from .corpus import (
    Dataset,
    LabelScheme,
    SchemeKind,
    detect_scheme,
    parse_conll,
    read_conll,
    sample_few_shot,
    write_conll,
)
from .denoise import filter_entity_only, filter_strict, write_rejections
from .entity_base import build_entity_base, load_entity_base, merge_bases, save_entity_base
from .errors import ConfigError, StageError
from .fillers import build_unigram_filler, connect_external_filler
from .tagger import EvalReport, connect_external_tagger, evaluate, save_model, train

FILLER_ENDPOINT_VAR = "SEMIFACT_FILLER_ENDPOINT"
TAGGER_ENDPOINT_VAR = "SEMIFACT_TAGGER_ENDPOINT"

DENOISE_MODES = ("strict", "entity_only", "off")


@dataclass
class RunConfig:
    out_dir: Path
    seed: int
    train: Path | None = None
    dev: Path | None = None
    test: Path | None = None
    ood: dict[str, Path] = field(default_factory=dict)
    stopwords: Path | None = None
    entity_base: Path | None = None
    scheme: str = "BIO2"
    entity_types: tuple[str, ...] = ("PER", "LOC", "ORG", "MISC")
    k_shot: int = 100
    entity_ratio: int = 8
    context_ratio: int = 5
    span_len: int = 1
    filler: str = "builtin"
    tagger: str = "builtin"
    denoise: str = "strict"
    epochs: int = 5
    context_window: int = 1
    repeats: int = 1

    def __post_init__(self):
        self.out_dir = Path(self.out_dir)
        for name in ("train", "dev", "test", "stopwords", "entity_base"):
            value = getattr(self, name)
            if value is not None:
                setattr(self, name, Path(value))
        self.ood = {name: Path(p) for name, p in self.ood.items()}
        self.entity_types = tuple(self.entity_types)

    def validate(self) -> None:
        if not isinstance(self.seed, int):
            raise ConfigError("seed is mandatory and must be an integer")
        if not 0 <= self.entity_ratio <= 8:
            raise ConfigError(f"entity_ratio must be in [0, 8], got {self.entity_ratio}")
        if not 0 <= self.context_ratio <= 5:
            raise ConfigError(f"context_ratio must be in [0, 5], got {self.context_ratio}")
        if self.span_len not in (1, 2):
            raise ConfigError(f"span_len must be 1 or 2, got {self.span_len}")
        if self.k_shot < 1:
            raise ConfigError(f"k_shot must be >= 1, got {self.k_shot}")
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.repeats < 1:
            raise ConfigError(f"repeats must be >= 1, got {self.repeats}")
        if self.denoise not in DENOISE_MODES:
            raise ConfigError(f"denoise must be one of {DENOISE_MODES}, got {self.denoise!r}")
        if self.scheme not in (k.value for k in SchemeKind):
            raise ConfigError(f"unknown scheme kind {self.scheme!r}")
        if not self.entity_types:
            raise ConfigError("entity_types must not be empty")

    def label_scheme(self) -> LabelScheme:
        return LabelScheme(SchemeKind(self.scheme), self.entity_types)

    def echo(self) -> dict:
        doc = dataclasses.asdict(self)
        for key, value in doc.items():
            if isinstance(value, Path):
                doc[key] = str(value)
        doc["ood"] = {name: str(p) for name, p in self.ood.items()}
        doc["entity_types"] = list(self.entity_types)
        return doc


def load_config_file(path: str | Path) -> dict[str, str]:
    """Declarative key = value lines; # starts a comment; blank lines ignored."""
    mapping: dict[str, str] = {}
    for line_no, raw in enumerate(Path(path).read_text("utf-8").splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"{path}, line {line_no}: expected 'key = value', got {raw!r}")
        mapping[key.strip()] = value.strip()
    return mapping


_INT_KEYS = (
    "seed",
    "k_shot",
    "entity_ratio",
    "context_ratio",
    "span_len",
    "epochs",
    "context_window",
    "repeats",
)
_PATH_KEYS = ("train", "dev", "test", "stopwords", "entity_base", "out_dir")
_STR_KEYS = ("scheme", "filler", "tagger", "denoise")


def config_from_mapping(mapping: dict[str, str], base_dir: str | Path = ".") -> RunConfig:
    """Build a RunConfig from string key/value pairs (config file contents
    merged with any flag overrides). Relative paths resolve against base_dir.
    """
    base = Path(base_dir)
    kwargs: dict = {}
    ood: dict[str, Path] = {}
    for key, value in mapping.items():
        if key in _INT_KEYS:
            try:
                kwargs[key] = int(value)
            except ValueError:
                raise ConfigError(f"{key} must be an integer, got {value!r}") from None
        elif key in _PATH_KEYS:
            kwargs[key] = base / value
        elif key in _STR_KEYS:
            kwargs[key] = value
        elif key == "entity_types":
            kwargs[key] = tuple(t.strip() for t in value.split(",") if t.strip())
        elif key.startswith("ood."):
            ood[key[4:]] = base / value
        else:
            raise ConfigError(f"unknown configuration key {key!r}")
    if "seed" not in kwargs:
        raise ConfigError("seed is mandatory")
    if "out_dir" not in kwargs:
        raise ConfigError("out_dir is mandatory")
    kwargs["ood"] = ood
    cfg = RunConfig(**kwargs)
    cfg.validate()
    return cfg


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


@dataclass
class _Prepared:
    scheme: LabelScheme
    train_ds: Dataset
    few: Dataset
    base: object
    oracle: object
    filler: object


def _make_tagger_backend(cfg: RunConfig, few: Dataset, scheme: LabelScheme):
    spec = cfg.tagger
    if spec == "builtin":
        return train(few, cfg.epochs, cfg.seed)
    if spec == "external":
        endpoint = os.environ.get(TAGGER_ENDPOINT_VAR)
        if not endpoint:
            raise ConfigError(f"tagger=external requires {TAGGER_ENDPOINT_VAR}")
        return connect_external_tagger(endpoint, scheme)
    if spec.startswith(("http://", "https://")):
        return connect_external_tagger(spec, scheme)
    raise ConfigError(f"unknown tagger backend {spec!r}")


def _make_filler_backend(cfg: RunConfig, few: Dataset, train_ds: Dataset):
    spec = cfg.filler
    if spec == "builtin":
        return build_unigram_filler(few, cfg.context_window)
    if spec == "builtin@train":
        return build_unigram_filler(train_ds, cfg.context_window)
    if spec == "external":
        endpoint = os.environ.get(FILLER_ENDPOINT_VAR)
        if not endpoint:
            raise ConfigError(f"filler=external requires {FILLER_ENDPOINT_VAR}")
        return connect_external_filler(endpoint)
    if spec.startswith(("http://", "https://")):
        return connect_external_filler(spec)
    raise ConfigError(f"unknown filler backend {spec!r}")


def _denoise_pool(mode: str, pool, oracle):
    if mode == "strict":
        return filter_strict(pool, oracle)
    if mode == "entity_only":
        return filter_entity_only(pool, oracle)
    return list(pool), []


def _prepare(cfg: RunConfig) -> _Prepared:
    stage = "parse-train"
    try:
        if cfg.train is None:
            raise ConfigError("train corpus path is required")
        scheme = cfg.label_scheme()
        train_ds = read_conll(cfg.train, scheme)
        stage = "few-shot-sample"
        few = sample_few_shot(train_ds, cfg.k_shot, cfg.seed)
        stage = "entity-base"
        base = build_entity_base(few)
        if cfg.entity_base is not None:
            base = merge_bases(base, load_entity_base(cfg.entity_base))
        stage = "denoise-oracle"
        oracle = _make_tagger_backend(cfg, few, scheme)
        stage = "filler"
        filler = _make_filler_backend(cfg, few, train_ds)
    except StageError:
        raise
    except Exception as exc:
        raise StageError(stage, exc) from exc
    return _Prepared(scheme, train_ds, few, base, oracle, filler)


def _augment_prepared(cfg: RunConfig, prep: _Prepared) -> tuple[Dataset, dict]:
    stage = "generate-entity"
    written: list[Path] = []
    try:
        entity_pool = generate_pool(
            prep.few, GeneratorKind.ENTITY, cfg.entity_ratio, prep.base, cfg.seed
        )
        stage = "generate-context"
        context_pool = generate_pool(
            prep.few,
            GeneratorKind.CONTEXT,
            cfg.context_ratio,
            prep.filler,
            cfg.seed,
            span_len=cfg.span_len,
        )
        stage = "denoise"
        kept_entity, rejected_entity = _denoise_pool(cfg.denoise, entity_pool, prep.oracle)
        kept_context, rejected_context = _denoise_pool(cfg.denoise, context_pool, prep.oracle)
        stage = "mixup"
        mixed = mixup(prep.few, kept_entity, kept_context)
        stage = "write-outputs"
        out = cfg.out_dir
        out.mkdir(parents=True, exist_ok=True)

        inputs = {"train": {"path": str(cfg.train), "sha256": _sha256(cfg.train)}}
        if cfg.entity_base is not None:
            inputs["entity_base"] = {
                "path": str(cfg.entity_base),
                "sha256": _sha256(cfg.entity_base),
            }
        manifest = {
            "format": "run-manifest-v1",
            "config": cfg.echo(),
            "inputs": inputs,
            "seed": cfg.seed,
            "few_shot": {"k": cfg.k_shot, "sentences": len(prep.few)},
            "pools": {
                "entity": {
                    "ratio": cfg.entity_ratio,
                    "generated": len(entity_pool),
                    "kept": len(kept_entity),
                },
                "context": {
                    "ratio": cfg.context_ratio,
                    "generated": len(context_pool),
                    "kept": len(kept_context),
                },
            },
            "mixed_sentences": len(mixed),
        }

        def emit(name: str, writer) -> None:
            path = out / name
            written.append(path)
            writer(path)

        emit("fewshot.conll", lambda p: p.write_bytes(write_conll(prep.few)))
        emit("augmented.conll", lambda p: p.write_bytes(write_conll(mixed)))
        emit("entity_base.json", lambda p: save_entity_base(prep.base, p))
        if cfg.tagger == "builtin":
            emit("oracle.json", lambda p: save_model(prep.oracle, p))
        emit("pool_entity.jsonl", lambda p: save_pool(kept_entity, p))
        emit("pool_context.jsonl", lambda p: save_pool(kept_context, p))
        emit("rejects_entity.jsonl", lambda p: write_rejections(rejected_entity, p))
        emit("rejects_context.jsonl", lambda p: write_rejections(rejected_context, p))
        emit(
            "manifest.json",
            lambda p: p.write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n", "utf-8"),
        )
    except StageError:
        raise
    except Exception as exc:
        for path in written:
            path.unlink(missing_ok=True)
        raise StageError(stage, exc) from exc
    return mixed, manifest


def run_augment(cfg: RunConfig) -> tuple[Dataset, dict]:
    """Few-shot sample, build the entity base, train the denoising oracle,
    generate and filter both pools, mix, and write all artifacts.

    Byte-identical outputs for identical configurations.
    """
    cfg.validate()
    return _augment_prepared(cfg, _prepare(cfg))


@dataclass(frozen=True)
class GridSearchResult:
    surface: dict[tuple[int, int], float]
    best: tuple[int, int]
    tie_break: str
    failures: dict[tuple[int, int], str]


TIE_BREAK_RULE = "lowest-entity-ratio-then-lowest-context-ratio"


def select_best(surface: dict[tuple[int, int], float]) -> tuple[int, int]:
    """Argmax dev F1; equal maxima fall to the smaller entity ratio, then the
    smaller context ratio.
    """
    return min(surface, key=lambda pt: (-surface[pt], pt[0], pt[1]))


def grid_search_ratios(
    cfg: RunConfig,
    entity_ratios: Iterable[int] = range(1, 9),
    context_ratios: Iterable[int] = range(1, 6),
    jobs: int = 1,
) -> GridSearchResult:
    """Evaluate every (entity_ratio, context_ratio) grid point on the dev set
    and pick the argmax dev micro-F1; equal maxima fall to the smaller entity
    ratio, then the smaller context ratio.

    Points are independent jobs; running them in parallel yields the same
    surface and artifacts as running serially. The few-shot sample and the
    denoising oracle are shared across points since ratios do not affect them.
    """
    cfg.validate()
    if cfg.dev is None:
        raise ConfigError("grid search requires a dev corpus")
    points = [(e, c) for e in entity_ratios for c in context_ratios]
    if not points:
        raise ConfigError("empty grid")

    prep = _prepare(cfg)
    stage = "parse-dev"
    try:
        dev_ds = read_conll(cfg.dev, prep.scheme)
    except Exception as exc:
        raise StageError(stage, exc) from exc

    def run_point(point: tuple[int, int]) -> float:
        e, c = point
        point_cfg = dataclasses.replace(
            cfg, entity_ratio=e, context_ratio=c, out_dir=cfg.out_dir / "grid" / f"e{e}_c{c}"
        )
        mixed, _ = _augment_prepared(point_cfg, prep)
        model = train(mixed, cfg.epochs, cfg.seed)
        return evaluate(model, dev_ds).micro_f1

    surface: dict[tuple[int, int], float] = {}
    failures: dict[tuple[int, int], str] = {}
    if jobs <= 1:
        outcomes = [(point, _try_point(run_point, point)) for point in points]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = pool.map(lambda pt: (pt, _try_point(run_point, pt)), points)
            outcomes = list(results)
    for point, (value, error) in outcomes:
        if error is None:
            surface[point] = value
        else:
            failures[point] = error
    if not surface:
        raise StageError("gridsearch", RuntimeError("every grid point failed"))

    result = GridSearchResult(surface, select_best(surface), TIE_BREAK_RULE, failures)
    _write_grid_result(cfg.out_dir, result)
    return result


def _try_point(run_point, point) -> tuple[float, str | None]:
    try:
        return run_point(point), None
    except Exception as exc:
        return 0.0, f"{type(exc).__name__}: {exc}"


def _write_grid_result(out_dir: Path, result: GridSearchResult) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    doc = {
        "format": "grid-search-v1",
        "surface": {f"{e},{c}": f1 for (e, c), f1 in sorted(result.surface.items())},
        "best": list(result.best),
        "tie_break": result.tie_break,
        "failures": {f"{e},{c}": msg for (e, c), msg in sorted(result.failures.items())},
    }
    (out_dir / "gridsearch.json").write_text(
        json.dumps(doc, sort_keys=True, indent=2) + "\n", "utf-8"
    )
    lines = ["entity_ratio,context_ratio,micro_f1"]
    lines += [f"{e},{c},{f1}" for (e, c), f1 in sorted(result.surface.items())]
    (out_dir / "surface.csv").write_text("\n".join(lines) + "\n", "utf-8")


def load_grid_surface(path: str | Path) -> dict[tuple[int, int], float]:
    doc = json.loads(Path(path).read_text("utf-8"))
    surface: dict[tuple[int, int], float] = {}
    for key, value in doc["surface"].items():
        e, c = key.split(",")
        surface[(int(e), int(c))] = float(value)
    return surface


def run_eval(cfg: RunConfig, model, write: bool = True) -> dict[str, EvalReport]:
    """Evaluate a tagger handle in-domain and on every out-of-domain corpus;
    unseen OOD entity types are remapped to O first. Writes eval.json plus a
    combined delimited table when `write` is set.
    """
    from .corpus import remap_unseen_labels

    scheme = getattr(model, "scheme", None) or cfg.label_scheme()
    reports: dict[str, EvalReport] = {}
    stage = "eval-in-domain"
    try:
        if cfg.test is not None:
            if not cfg.test.exists():
                raise ConfigError(f"missing test corpus: {cfg.test}")
            reports["in_domain"] = evaluate(model, read_conll(cfg.test, scheme))
        for name in sorted(cfg.ood):
            stage = f"eval-ood-{name}"
            path = cfg.ood[name]
            if not path.exists():
                raise ConfigError(f"missing OOD corpus {name!r}: {path}")
            raw = path.read_bytes()
            try:
                ood_scheme = detect_scheme(raw)
            except ValueError:
                ood_scheme = scheme
            ood_ds = parse_conll(raw, ood_scheme, name=name)
            reports[f"ood:{name}"] = evaluate(model, remap_unseen_labels(ood_ds, scheme))
        if write:
            stage = "write-eval"
            write_eval_reports(reports, cfg.out_dir)
    except StageError:
        raise
    except Exception as exc:
        raise StageError(stage, exc) from exc
    return reports


def write_eval_reports(reports: dict[str, EvalReport], out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    doc = {name: report.to_dict() for name, report in sorted(reports.items())}
    (out_dir / "eval.json").write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n", "utf-8")
    lines = ["corpus,precision,recall,micro_f1,tp,fp,fn"]
    for name, report in sorted(reports.items()):
        lines.append(
            f"{name},{report.precision},{report.recall},{report.micro_f1},"
            f"{report.tp},{report.fp},{report.fn}"
        )
    (out_dir / "eval.csv").write_text("\n".join(lines) + "\n", "utf-8")
