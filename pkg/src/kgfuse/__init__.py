"""Knowledge-enriched relation extraction.

Builds a knowledge graph from labeled training documents, pretrains
translation, bilinear, or complex-bilinear embeddings on it, and fuses
the embedding-inferred relation vector of a document's entity pair into
the document's contextual representation before classification. Every
stage is deterministic given its seed.
"""

from .corpus import (
    MarkedDocument,
    RelationDocument,
    SplitSpec,
    extract_triples,
    insert_entity_markers,
    make_heldout_relation_split,
    parse_re_dataset,
    strip_markers,
    tokenize,
    write_jsonl,
)
from .encoder import (
    ContextEncoder,
    EmbeddingTable,
    builtin_encoder,
    encode_document,
    external_encoder,
    load_builtin_encoder,
    load_external_embeddings,
    save_builtin_encoder,
    write_embeddings,
)
from .errors import (
    ConfigError,
    DataError,
    FileFormatError,
    KgfuseError,
    MissingEmbeddingError,
    NumericError,
    ParseError,
    ValidationError,
    VocabularyError,
)
from .fusion import (
    FusionClassifier,
    ReMetrics,
    RelationInference,
    TrainReConfig,
    TrainReResult,
    compute_re_metrics,
    evaluate_re,
    fuse,
    init_classifier,
    load_classifier,
    predict,
    predict_batch,
    save_classifier,
    train_re,
)
from .kge import (
    COMPLEX,
    DISTMULT,
    TRANSE,
    KgeModel,
    KgeTrainConfig,
    LpMetrics,
    evaluate_link_prediction,
    init_model,
    kge_gradients,
    load_model,
    pair_loss,
    rank_relations,
    relation_representation,
    save_model,
    score,
    score_all_relations,
    train_kge,
)
from .kgstore import (
    KnowledgeGraph,
    NegativeSample,
    Vocab,
    build_kg,
    build_vocabs,
    load_kg,
    sample_negative,
    save_kg,
)
from .synthetic import (
    SyntheticConfig,
    SyntheticCorpus,
    antisymmetry_kg,
    block_kg,
    generate_corpus,
    make_pair_table,
)

__version__ = "0.1.0"
