"""Semi-factual data augmentation and evaluation for few-shot cross-domain NER."""

from .augment import (
    RATIO_CAPS,
    AugmentedSentence,
    GeneratorKind,
    gen_context_semifact,
    gen_entity_semifact,
    generate_pool,
    load_pool,
    mixup,
    save_pool,
)
from .corpus import (
    Dataset,
    EntitySpan,
    LabelScheme,
    SchemeKind,
    Sentence,
    Token,
    convert_scheme,
    detect_scheme,
    extract_spans,
    extract_spans_from_tags,
    load_stopwords,
    parse_conll,
    read_conll,
    remap_unseen_labels,
    sample_few_shot,
    vocab_overlap,
    write_conll,
    write_conll_file,
)
from .denoise import filter_entity_only, filter_strict
from .entity_base import (
    EntityBase,
    build_entity_base,
    load_entity_base,
    merge_bases,
    sample_replacement,
    save_entity_base,
)
from .errors import (
    ConfigError,
    InternalError,
    LabelError,
    MissingLabelWordError,
    MissingPoolError,
    ParseError,
    ProtocolError,
    SchemeViolationError,
    SemifactError,
    StageError,
    TransportError,
)
from .fillers import (
    ExternalFiller,
    FillCandidate,
    Filler,
    MaskQuery,
    UnigramFiller,
    build_unigram_filler,
    connect_external_filler,
)
from .pipeline import (
    GridSearchResult,
    RunConfig,
    grid_search_ratios,
    run_augment,
    run_eval,
)
from .prompt import (
    LabelWordMap,
    PromptTemplate,
    build_entlm_target,
    build_label_word_map,
    explicit_label_word_map,
    render_template,
    score_replm,
)
from .tagger import (
    EvalReport,
    ExternalTagger,
    TaggerModel,
    connect_external_tagger,
    evaluate,
    featurize,
    load_model,
    predict,
    save_model,
    train,
)

__version__ = "0.1.0"
