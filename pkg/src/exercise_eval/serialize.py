"""Versioned ``.npz`` containers for trained models and pipelines.

Every array of a model lives under a key prefix; a JSON document under
``<prefix>__meta__`` records the format version, algorithm, hyperparameters
and label dictionary. Files are loaded with ``allow_pickle=False``.
"""

from __future__ import annotations

import json
import os
from pathlib import Path
from typing import Mapping

import numpy as np

from .classifiers import ESTIMATOR_TYPES, AlgoConfig, TrainedModel
from .features import Standardizer

FORMAT = "exercise-eval-model"
VERSION = 1


class FormatError(ValueError):
    pass


def model_to_arrays(model: TrainedModel, prefix: str = "") -> dict[str, np.ndarray]:
    meta = {
        "format": FORMAT,
        "version": VERSION,
        "config": model.config.to_dict(),
        "classes": list(model.classes),
        "seed": model.seed,
        "has_standardizer": model.standardizer is not None,
    }
    out = {f"{prefix}__meta__": np.array(json.dumps(meta, sort_keys=True))}
    for key, val in model.estimator.state().items():
        out[f"{prefix}state/{key}"] = np.asarray(val)
    if model.standardizer is not None:
        out[f"{prefix}standardizer/means"] = model.standardizer.means
        out[f"{prefix}standardizer/stds"] = model.standardizer.stds
    return out


def model_from_arrays(arrays: Mapping[str, np.ndarray], prefix: str = "") -> TrainedModel:
    try:
        meta = json.loads(str(arrays[f"{prefix}__meta__"]))
    except KeyError as exc:
        raise FormatError(f"no model stored under prefix {prefix!r}") from exc
    if meta.get("format") != FORMAT:
        raise FormatError(f"unexpected container format {meta.get('format')!r}")
    if meta.get("version") != VERSION:
        raise FormatError(f"unsupported model format version {meta.get('version')}")
    config = AlgoConfig.from_dict(meta["config"])
    state_prefix = f"{prefix}state/"
    state = {k[len(state_prefix):]: v for k, v in arrays.items() if k.startswith(state_prefix)}
    est = ESTIMATOR_TYPES[config.kind].from_state(state)
    std = None
    if meta["has_standardizer"]:
        std = Standardizer(np.asarray(arrays[f"{prefix}standardizer/means"]),
                           np.asarray(arrays[f"{prefix}standardizer/stds"]))
    return TrainedModel(config=config, classes=tuple(meta["classes"]), estimator=est, standardizer=std,
                        seed=int(meta["seed"]))


def save_arrays(arrays: Mapping[str, np.ndarray], path: str | os.PathLike) -> Path:
    path = Path(path)
    with open(path, "wb") as fh:
        np.savez_compressed(fh, **arrays)
    return path


def load_arrays(path: str | os.PathLike) -> dict[str, np.ndarray]:
    with np.load(path, allow_pickle=False) as data:
        return {k: data[k] for k in data.files}


def save_model(model: TrainedModel, path: str | os.PathLike) -> Path:
    return save_arrays(model_to_arrays(model), path)


def load_model(path: str | os.PathLike) -> TrainedModel:
    return model_from_arrays(load_arrays(path))
