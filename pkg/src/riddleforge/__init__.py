"""riddleforge: commonsense riddle augmentation for image-text corpora.

Turns a ConceptNet-style assertion dump plus a caption manifest into
subject-hidden commonsense riddles for contrastive training, builds a
retrieval diagnostic benchmark with neighborhood hard negatives, and scores
model outputs with Acc@50.
"""

from .augment import (
    CyclingSampler,
    ImageTextRecord,
    MixSchedule,
    augment_dataset,
    compose_batch,
    mix_stream,
    riddles_for_image,
    schedule_p,
)
from .benchmark import (
    BenchmarkConfig,
    CandidateSet,
    HoldoutSpec,
    assemble_splits,
    build_candidate_set,
    load_benchmark,
    mine_hard_negatives,
    partition_holdout,
)
from .errors import (
    EmptyTerm,
    InsufficientData,
    InvalidBatch,
    InvalidP,
    MalformedRecord,
    MissingScore,
    NoPositive,
    PoolExhausted,
    RiddleforgeError,
    StepOutOfRange,
    TooManyMalformedRecords,
    UnmappedRelation,
)
from .estimators import CaptionEntityExtractor, RiddleGenerator
from .evalstats import (
    ScoreMatrix,
    accuracy_at_candidates,
    compute_corpus_stats,
    evaluate_report,
    load_scores,
)
from .extract import (
    Caption,
    EntitySet,
    ExtractionConfig,
    extract_candidate_terms,
    extract_entities,
    match_to_graph,
)
from .graph import (
    Edge,
    IngestConfig,
    KnowledgeGraph,
    ingest_assertions,
    load_snapshot,
    normalize_term,
    save_snapshot,
    surface_form,
)
from .linearize import (
    LinearizeConfig,
    Riddle,
    SubGraph,
    classify_substitution,
    generate_riddles,
    linearize_edge,
    query_bidirectional_subgraph,
    riddle_from_record,
    substitute_and_filter,
)

__version__ = "0.1.0"
