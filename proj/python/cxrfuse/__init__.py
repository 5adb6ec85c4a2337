"""Python bindings for the cxrfuse report generator."""

import json

from ._core import (
    ConfigError,
    ContractError,
    DataError,
    DimensionError,
    Error,
    EvaluationError,
    TrainingError,
    attention_weights,
    bleu,
    celsius_to_fahrenheit,
    embedding_f1,
    encode_gender,
    lr_at_step,
    map_ethnicity,
    minmax_normalize,
    rouge_l,
    run_generate,
    run_preprocess,
    run_synth,
    run_train,
    standardize_text,
    tokenize,
)
from . import _core


def corpus_evaluate(rows, dim=64):
    """rows: iterable of (sample_id, generated, reference) strings."""
    return json.loads(_core.corpus_evaluate_json(list(rows), dim))


def run_evaluate(generated, out):
    return json.loads(_core.run_evaluate_json(generated, out))


def default_config():
    return json.loads(_core.default_config_json())


def _encode_config(config):
    return "" if config is None else json.dumps(config)


def preprocess(data, out, config=None):
    return run_preprocess(data, out, _encode_config(config))


def train(data, out, config=None):
    return run_train(data, out, _encode_config(config))


__all__ = [name for name in dir() if not name.startswith("_")]
