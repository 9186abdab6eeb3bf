"""Counterfactual detection and antecedent/consequent extraction."""

from ._core import (
    AlignmentError,
    Classifier,
    CrfModel,
    Error,
    FormatError,
    Grammar,
    IoError,
    TextPipeline,
    TrainingError,
    ValidationError,
    classification_report,
    clean,
    cross_validate,
    deserialize_classifier,
    labels_to_spans,
    load_classifier,
    normalize_tags,
    prf1,
    stem,
    stratified_kfold,
    token_chunk_f1,
    tokenize,
    train_classifier,
    train_crf,
)

__version__ = "1.0.0"

__all__ = [name for name in dir() if not name.startswith("_")]
