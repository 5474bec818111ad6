"""Turn-taking analytics and calibrated linear classification for
dual-channel call transcripts.

The pipeline: parse labeled conversations (corpus), merge utterances into
talkspurts and label the timeline with eight segment types (turntaking),
pool or load feature sets (features), rank features by information gain
(selection), train and calibrate linear SVMs (learn), and drive everything
from configs (experiment) or the ``turnlens`` CLI. A Markov-chain generator
(synth) produces labeled synthetic datasets for testing.
"""
from ._version import __version__
from .corpus import (
    Conversation,
    Manifest,
    Utterance,
    channel_tokens,
    load_manifest,
    parse_conversation,
    serialize_conversation,
)
from .errors import ConfigError, CorpusError, DataError, FormatError
from .experiment import (
    ExperimentConfig,
    ExperimentReport,
    config_hash,
    derive_ttc,
    run_experiment,
    tt_matrix,
)
from .features import (
    FeatureMatrix,
    FrameMatrix,
    StandardizerParams,
    apply_standardizer,
    concat_feature_sets,
    fit_standardizer,
    pool_functionals,
    pooled_feature_names,
    read_frmx,
    read_fset,
    truncate_head,
    truncate_tail,
    write_frmx,
    write_fset,
)
from .learn import (
    DEFAULT_C_GRID,
    EvalResult,
    IsotonicCalibrator,
    LinearModel,
    TrainedModel,
    calibrate,
    cross_val_calibrator,
    decision_scores,
    evaluate,
    fit_isotonic,
    grid_search_C,
    predict_signs,
    train_svm,
    uar,
)
from .selection import (
    ContingencyTable,
    RelevanceRanking,
    discretize_mdlp,
    entropy,
    information_gain_binned,
    rank_relevant,
)
from .synth import (
    GeneratedConversation,
    Profile,
    generate_conversation,
    generate_dataset,
)
from .turntaking import (
    DEFAULT_MERGE_GAP,
    SILENCE_TYPES,
    SPEAKING_TYPES,
    SUCCESSORS,
    TTC_NAMES,
    TT_FEATURE_NAMES,
    Segment,
    SegmentSequence,
    SegmentType,
    Talkspurt,
    TTFeatureVector,
    build_talkspurts,
    conversation_segments,
    label_segments,
    select_named,
    tt_features,
)

__all__ = [
    "__version__",
    "ConfigError",
    "CorpusError",
    "DataError",
    "FormatError",
    "Conversation",
    "Manifest",
    "Utterance",
    "channel_tokens",
    "load_manifest",
    "parse_conversation",
    "serialize_conversation",
    "DEFAULT_MERGE_GAP",
    "SILENCE_TYPES",
    "SPEAKING_TYPES",
    "SUCCESSORS",
    "TTC_NAMES",
    "TT_FEATURE_NAMES",
    "Segment",
    "SegmentSequence",
    "SegmentType",
    "Talkspurt",
    "TTFeatureVector",
    "build_talkspurts",
    "conversation_segments",
    "label_segments",
    "select_named",
    "tt_features",
    "FeatureMatrix",
    "FrameMatrix",
    "StandardizerParams",
    "apply_standardizer",
    "concat_feature_sets",
    "fit_standardizer",
    "pool_functionals",
    "pooled_feature_names",
    "read_frmx",
    "read_fset",
    "truncate_head",
    "truncate_tail",
    "write_frmx",
    "write_fset",
    "ContingencyTable",
    "RelevanceRanking",
    "discretize_mdlp",
    "entropy",
    "information_gain_binned",
    "rank_relevant",
    "DEFAULT_C_GRID",
    "EvalResult",
    "IsotonicCalibrator",
    "LinearModel",
    "TrainedModel",
    "calibrate",
    "cross_val_calibrator",
    "decision_scores",
    "evaluate",
    "fit_isotonic",
    "grid_search_C",
    "predict_signs",
    "train_svm",
    "uar",
    "GeneratedConversation",
    "Profile",
    "generate_conversation",
    "generate_dataset",
    "ExperimentConfig",
    "ExperimentReport",
    "config_hash",
    "derive_ttc",
    "run_experiment",
    "tt_matrix",
]
