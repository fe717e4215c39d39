"""Model families, reference presets and the versioned JSON model format."""

from __future__ import annotations

import copy
import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .ensembles import BoostEnsemble, ForestModel, fit_adaboost_m2, fit_forest, fit_rusboost
from .models import (
    KNNModel, NNModel, OLRModel, PGMModel, TreeModel, fit_knn, fit_nn, fit_olr, fit_pgm, fit_tree,
)
from .svm import SVMBinaryModel, SVMMulticlassModel, fit_svm_ovo

FORMAT_NAME = "stagekit-model"
FORMAT_VERSION = 1


@dataclass(eq=False)
class MajorityModel:
    """Always predicts the most frequent training class; probabilities are
    the training class frequencies."""

    label: int
    priors: np.ndarray

    def predict(self, X) -> np.ndarray:
        return np.full(np.atleast_2d(X).shape[0], self.label)

    def predict_proba(self, X) -> np.ndarray:
        return np.tile(self.priors, (np.atleast_2d(X).shape[0], 1))


def fit_majority(X, y, n_classes=3):
    counts = np.bincount(np.asarray(y, dtype=int), minlength=n_classes + 1)[1:]
    return MajorityModel(int(np.argmax(counts)) + 1, counts / counts.sum())


DEFAULTS = {
    "majority": {},
    "olr": {"tol": 1e-6, "max_iter": 500},
    "tree": {"min_leaf": 1, "max_depth": None},
    "knn": {"k_nn": 5},
    "pgm": {"costs": [1.0, 1.0, 1.0], "ridge": None},
    "nn": {"hidden": [30], "learning_rate": 0.1, "epochs": 200, "batch_size": 32},
    "deepnn": {"hidden": [100, 38], "learning_rate": 0.1, "epochs": 200, "batch_size": 32},
    "svm": {"C": 1.0, "gamma": 0.0355, "class_costs": [1.0, 1.0, 1.0], "tol": 1e-3,
            "max_passes": 200, "standardize": True},
    "adaboost": {"costs": [1.0, 1.0, 1.0], "n_rounds": 100, "max_depth": 3, "min_leaf": 1},
    "rusboost": {"proportions": [1.0, 1.0, 1.0], "n_rounds": 50, "max_depth": 3, "min_leaf": 1},
    "forest": {"costs": [1.0, 1.0, 1.0], "n_trees": 100, "min_leaf": 1, "max_features": None},
}

# models whose predict_proba is a class-probability estimate usable for Brier
PROBABILISTIC = {"majority", "olr", "pgm", "nn", "deepnn", "knn", "tree", "forest",
                 "adaboost", "rusboost"}

PRESETS = {
    "paper-svm": ("svm", {"C": 33.0416, "gamma": 0.0355, "class_costs": [2.0, 1.0, 2.7733]}),
    "paper-adaboost": ("adaboost", {"costs": [1.3651, 1.0003, 2.6583], "n_rounds": 117}),
    "paper-rusboost": ("rusboost", {"proportions": [2.0781, 9.3262, 1.519], "n_rounds": 47}),
    "paper-forest": ("forest", {"costs": [2.3732, 12.4722, 1.3256], "n_trees": 51}),
    "paper-pgm": ("pgm", {"costs": [598.72, 5724.99, 28.88]}),
    "paper-nn": ("nn", {"hidden": [30]}),
    "paper-deepnn": ("deepnn", {"hidden": [100, 38]}),
    "paper-olr": ("olr", {}),
}


@dataclass(frozen=True)
class ModelSpec:
    family: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.family not in DEFAULTS:
            raise ValueError(f"unknown model family {self.family!r}; choose from {sorted(DEFAULTS)}")
        unknown = set(self.params) - set(DEFAULTS[self.family])
        if unknown:
            raise ValueError(f"unknown parameters for {self.family}: {sorted(unknown)}")

    def resolved(self) -> dict:
        out = copy.deepcopy(DEFAULTS[self.family])
        out.update(copy.deepcopy(self.params))
        return out

    @property
    def probabilistic(self) -> bool:
        return self.family in PROBABILISTIC

    def fit(self, X, y, seed: int = 0):
        return fit_model(self.family, self.resolved(), X, y, seed)

    def to_dict(self) -> dict:
        return {"family": self.family, "params": self.resolved()}


def preset(name: str) -> ModelSpec:
    try:
        family, params = PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
    return ModelSpec(family, copy.deepcopy(params))


def fit_model(family, p, X, y, seed=0):
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int)
    if family == "majority":
        return fit_majority(X, y)
    if family == "olr":
        return fit_olr(X, y, tol=p["tol"], max_iter=p["max_iter"])
    if family == "tree":
        return fit_tree(X, y, min_leaf=p["min_leaf"], max_depth=p["max_depth"])
    if family == "knn":
        return fit_knn(X, y, k_nn=p["k_nn"])
    if family == "pgm":
        return fit_pgm(X, y, costs=p["costs"], ridge=p["ridge"])
    if family in ("nn", "deepnn"):
        return fit_nn(X, y, hidden=p["hidden"], learning_rate=p["learning_rate"],
                      epochs=p["epochs"], batch_size=p["batch_size"], seed=seed)
    if family == "svm":
        return fit_svm_ovo(X, y, C=p["C"], gamma=p["gamma"], class_costs=p["class_costs"],
                           tol=p["tol"], max_passes=p["max_passes"], seed=seed,
                           standardize=p["standardize"])
    if family == "adaboost":
        return fit_adaboost_m2(X, y, p["costs"], p["n_rounds"], seed=seed,
                               min_leaf=p["min_leaf"], max_depth=p["max_depth"])
    if family == "rusboost":
        return fit_rusboost(X, y, p["proportions"], p["n_rounds"], seed=seed,
                            min_leaf=p["min_leaf"], max_depth=p["max_depth"])
    if family == "forest":
        return fit_forest(X, y, p["costs"], p["n_trees"], min_leaf=p["min_leaf"], seed=seed,
                          max_features=p["max_features"])
    raise ValueError(f"unknown model family {family!r}")


# ------------------------------------------------------------ serialization

_TYPES = {cls.__name__: cls for cls in (
    MajorityModel, OLRModel, TreeModel, KNNModel, PGMModel, NNModel, SVMBinaryModel,
    SVMMulticlassModel, BoostEnsemble, ForestModel,
)}


def _encode(obj):
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        name = type(obj).__name__
        if name not in _TYPES:
            raise TypeError(f"cannot serialise {name}")
        return {"__type__": name, **{f.name: _encode(getattr(obj, f.name))
                                     for f in dataclasses.fields(obj)}}
    if isinstance(obj, np.ndarray):
        return {"__ndarray__": obj.dtype.str, "shape": list(obj.shape),
                "data": [_encode(v) for v in obj.ravel().tolist()]}
    if isinstance(obj, tuple):
        return {"__tuple__": [_encode(v) for v in obj]}
    if isinstance(obj, list):
        return [_encode(v) for v in obj]
    if isinstance(obj, dict):
        return {str(k): _encode(v) for k, v in obj.items()}
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else {"__float__": repr(v)}
    if obj is None or isinstance(obj, str):
        return obj
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def _decode(obj):
    if isinstance(obj, list):
        return [_decode(v) for v in obj]
    if not isinstance(obj, dict):
        return obj
    if "__type__" in obj:
        cls = _TYPES[obj["__type__"]]
        return cls(**{k: _decode(v) for k, v in obj.items() if k != "__type__"})
    if "__ndarray__" in obj:
        data = [_decode(v) for v in obj["data"]]
        return np.array(data, dtype=np.dtype(obj["__ndarray__"])).reshape(obj["shape"])
    if "__tuple__" in obj:
        return tuple(_decode(v) for v in obj["__tuple__"])
    if "__float__" in obj:
        return float(obj["__float__"])
    return {k: _decode(v) for k, v in obj.items()}


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def model_to_document(model, spec: ModelSpec | None = None, seed: int | None = None) -> dict:
    return {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "spec": None if spec is None else spec.to_dict(),
        "seed": seed,
        "model": _encode(model),
    }


def model_from_document(doc: dict):
    if doc.get("format") != FORMAT_NAME:
        raise ValueError("not a stagekit model document")
    if doc.get("version") != FORMAT_VERSION:
        raise ValueError(f"unsupported model format version {doc.get('version')}")
    return _decode(doc["model"])


def dumps_model(model, spec=None, seed=None) -> str:
    return canonical_json(model_to_document(model, spec, seed))


def loads_model(text: str):
    return model_from_document(json.loads(text))


def param_hash(model) -> str:
    """SHA-256 of the canonical encoding of a fitted model's state."""
    return hashlib.sha256(canonical_json(_encode(model)).encode()).hexdigest()
