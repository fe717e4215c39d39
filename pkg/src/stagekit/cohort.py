"""Cohort data model, CSV ingestion, stratified folds and a synthetic generator."""

from __future__ import annotations

import csv
import logging
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)

STAGES = (1, 2, 3)
STAGE_NAMES = {1: "normal", 2: "early", 3: "moderate"}
GROUPS = ("HC", "PD")
MAX_SCORE = 4

# MDS-UPDRS Parts I-III item abbreviations, in questionnaire order.
UPDRS_FEATURES = (
    "P1_COG", "P1_HALL", "P1_DPRS", "P1_ANXS", "P1_APAT", "P1_DDS", "P1_SLPN",
    "P1_SLPD", "P1_PAIN", "P1_URIN", "P1_CNST", "P1_LTHD", "P1_FATG",
    "P2_SPCH", "P2_SALV", "P2_SWAL", "P2_EAT", "P2_DRES", "P2_HYGN", "P2_HWRT",
    "P2_HOBB", "P2_TURN", "P2_TRMR", "P2_RISE", "P2_WALK", "P2_FREZ",
    "P3_SPCH", "P3_FACXP", "P3_RIGN", "P3_RIGRU", "P3_RIGLU", "P3_RIGRL",
    "P3_RIGLL", "P3_FTAPR", "P3_FTAPL", "P3_HMOVR", "P3_HMOVL", "P3_PRSPR",
    "P3_PRSPL", "P3_TTAPR", "P3_TTAPL", "P3_LGAGR", "P3_LGAGL", "P3_RISNG",
    "P3_GAIT", "P3_FRZGT", "P3_PSTBL", "P3_POSTR", "P3_BRADY", "P3_PTRMR",
    "P3_PTRML", "P3_KTRMR", "P3_KTRML", "P3_RTARU", "P3_RTALU", "P3_RTARL",
    "P3_RTALL", "P3_RTALJ", "P3_RTCON",
)

DEFAULT_PROPORTIONS = (0.1662, 0.7990, 0.0348)


class CohortError(ValueError):
    """Raised when input data cannot form a valid cohort."""


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Cohort:
    """Feature matrix of ordinal item scores with stage (and optional group) labels.

    ``features`` is n x m with integer scores in [0, 4]; ``stage_labels`` takes
    values in {1, 2, 3}; ``group_labels`` is an optional array of "HC"/"PD".
    Arrays are copied and made read-only on construction.
    """

    features: np.ndarray
    stage_labels: np.ndarray
    feature_names: tuple[str, ...]
    group_labels: np.ndarray | None = None
    n_dropped: int = 0

    def __post_init__(self):
        X = np.asarray(self.features, dtype=float)
        if X.ndim != 2:
            raise CohortError("features must be a 2-D matrix")
        y = np.asarray(self.stage_labels)
        if y.shape != (X.shape[0],):
            raise CohortError(f"expected {X.shape[0]} stage labels, got {y.shape}")
        if not np.all(np.isin(y, STAGES)):
            bad = sorted(set(y.tolist()) - set(STAGES))
            raise CohortError(f"stage labels outside {{1,2,3}}: {bad}")
        if not np.all(np.isfinite(X)):
            raise CohortError("features contain missing or non-finite values")
        if X.size and (X.min() < 0 or X.max() > MAX_SCORE or np.any(X != np.round(X))):
            raise CohortError("scores must be integers in [0, 4]")
        names = tuple(str(s) for s in self.feature_names)
        if len(names) != X.shape[1]:
            raise CohortError(f"{len(names)} feature names for {X.shape[1]} columns")
        object.__setattr__(self, "features", _frozen(X))
        object.__setattr__(self, "stage_labels", _frozen(y.astype(int)))
        object.__setattr__(self, "feature_names", names)
        if self.group_labels is not None:
            g = np.asarray(self.group_labels, dtype=object)
            if g.shape != y.shape:
                raise CohortError("group labels must match the number of rows")
            if not all(v in GROUPS for v in g):
                raise CohortError("group labels must be 'HC' or 'PD'")
            object.__setattr__(self, "group_labels", _frozen(g))

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def m(self) -> int:
        return self.features.shape[1]

    def class_counts(self) -> dict[int, int]:
        return {c: int(np.sum(self.stage_labels == c)) for c in STAGES}

    def totals(self) -> np.ndarray:
        """Per-row sum of all item scores (the scale total)."""
        return self.features.sum(axis=1)

    def subset(self, rows=None, columns=None) -> "Cohort":
        rows = np.arange(self.n) if rows is None else np.asarray(rows)
        columns = np.arange(self.m) if columns is None else np.asarray(columns, dtype=int)
        groups = None if self.group_labels is None else self.group_labels[rows]
        return Cohort(
            self.features[np.ix_(rows, columns)],
            self.stage_labels[rows],
            tuple(self.feature_names[j] for j in columns),
            groups,
        )

    def equals(self, other: "Cohort") -> bool:
        same_groups = (self.group_labels is None) == (other.group_labels is None)
        if same_groups and self.group_labels is not None:
            same_groups = np.array_equal(self.group_labels, other.group_labels)
        return (
            same_groups
            and self.feature_names == other.feature_names
            and np.array_equal(self.features, other.features)
            and np.array_equal(self.stage_labels, other.stage_labels)
        )


# --------------------------------------------------------------------- CSV I/O


def load_csv(
    path,
    label_column: str = "stage",
    feature_columns: Sequence[str] | None = None,
    group_column: str | None = None,
) -> Cohort:
    """Read a cohort from a comma-delimited UTF-8 file with a header row.

    When ``feature_columns`` is None every column other than the label and
    group columns is a feature. Rows with an empty cell in any used column are
    dropped; the count is kept on ``Cohort.n_dropped``.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such cohort file: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise CohortError(f"{path} is empty") from None
        rows = list(reader)

    index = {name: j for j, name in enumerate(header)}
    if label_column not in index:
        raise CohortError(f"unknown label column {label_column!r}")
    if group_column is not None and group_column not in index:
        raise CohortError(f"unknown group column {group_column!r}")
    if feature_columns is None:
        skip = {label_column, group_column}
        feature_columns = [h for h in header if h not in skip]
    for name in feature_columns:
        if name not in index:
            raise CohortError(f"unknown feature column {name!r}")
    if not feature_columns:
        raise CohortError("schema names no feature columns")

    used = [index[label_column], *(index[c] for c in feature_columns)]
    if group_column is not None:
        used.append(index[group_column])

    X, y, g = [], [], []
    dropped = 0
    for lineno, row in enumerate(rows, start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise CohortError(f"line {lineno}: expected {len(header)} cells, got {len(row)}")
        if any(row[j].strip() == "" for j in used):
            dropped += 1
            continue
        try:
            values = [float(row[index[c]]) for c in feature_columns]
            label = float(row[index[label_column]])
        except ValueError as exc:
            raise CohortError(f"line {lineno}: non-numeric cell ({exc})") from None
        if label not in STAGES:
            raise CohortError(f"line {lineno}: stage label {row[index[label_column]]!r} not in {{1,2,3}}")
        X.append(values)
        y.append(int(label))
        if group_column is not None:
            g.append(row[index[group_column]].strip())

    if dropped:
        logger.info("dropped %d row(s) with missing values from %s", dropped, path)
    return Cohort(
        np.array(X, dtype=float).reshape(len(X), len(feature_columns)),
        np.array(y, dtype=int),
        tuple(feature_columns),
        np.array(g, dtype=object) if group_column is not None else None,
        n_dropped=dropped,
    )


def write_csv(cohort: Cohort, path, label_column: str = "stage", group_column: str = "group"):
    path = Path(path)
    header = [*cohort.feature_names, label_column]
    if cohort.group_labels is not None:
        header.append(group_column)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for i in range(cohort.n):
            row = [str(int(v)) for v in cohort.features[i]]
            row.append(str(int(cohort.stage_labels[i])))
            if cohort.group_labels is not None:
                row.append(cohort.group_labels[i])
            w.writerow(row)


# ----------------------------------------------------------- synthetic cohorts


def default_profiles(m: int = len(UPDRS_FEATURES)) -> np.ndarray:
    """Mean item score per stage (3 x m).

    Every item rises a little from normal to early and again to moderate; about
    one item in six jumps strongly between normal and early, and every ninth
    item (offset 4) jumps strongly between early and moderate.
    """
    j = np.arange(m)
    wave = 0.5 * (1 + np.sin(2.7 * j))
    normal = 0.1 + 0.3 * wave
    early = normal + 0.3 + 1.4 * (wave > 0.85)
    moderate = early + 0.15 + 1.0 * (j % 9 == 4)
    return np.vstack([normal, early, moderate])


@dataclass
class GeneratorSpec:
    """Parameters for a synthetic cohort.

    ``overlap`` is the standard deviation of the Gaussian jitter added to each
    item before rounding; at 0 every row equals its (rounded) class profile.
    """

    n: int = 2000
    class_proportions: tuple[float, float, float] = DEFAULT_PROPORTIONS
    class_mean_profiles: np.ndarray | None = None
    overlap: float = 0.8
    seed: int = 0
    feature_names: tuple[str, ...] | None = None

    def __post_init__(self):
        p = np.asarray(self.class_proportions, dtype=float)
        if p.shape != (3,) or np.any(p < 0) or abs(p.sum() - 1) > 1e-12:
            raise CohortError("class proportions must be 3 non-negative values summing to 1")
        if self.class_mean_profiles is None:
            m = len(self.feature_names) if self.feature_names else len(UPDRS_FEATURES)
            self.class_mean_profiles = default_profiles(m)
        prof = np.asarray(self.class_mean_profiles, dtype=float)
        if prof.ndim != 2 or prof.shape[0] != 3 or prof.shape[1] < 1:
            raise CohortError("class mean profiles must be a 3 x m matrix with m >= 1")
        self.class_mean_profiles = prof
        if self.overlap < 0:
            raise CohortError("overlap must be non-negative")
        if self.feature_names is None:
            m = prof.shape[1]
            if m == len(UPDRS_FEATURES):
                self.feature_names = UPDRS_FEATURES
            else:
                self.feature_names = tuple(f"F{j + 1:02d}" for j in range(m))


def largest_remainder(n: int, proportions) -> np.ndarray:
    """Integer counts summing to n; leftovers go to the largest fractional
    parts, ties to the lower class index."""
    quotas = n * np.asarray(proportions, dtype=float)
    counts = np.floor(quotas).astype(int)
    short = n - counts.sum()
    order = sorted(range(len(quotas)), key=lambda k: (-(quotas[k] - counts[k]), k))
    for k in order[:short]:
        counts[k] += 1
    return counts


def generate_synthetic(spec: GeneratorSpec) -> Cohort:
    if spec.n < 3:
        raise CohortError("synthetic cohorts need n >= 3")
    counts = largest_remainder(spec.n, spec.class_proportions)
    if np.any(counts == 0):
        warnings.warn(f"class counts {counts.tolist()} leave a class empty", stacklevel=2)
    rng = np.random.default_rng(spec.seed)
    prof = spec.class_mean_profiles
    labels = np.repeat(np.array(STAGES), counts)
    X = prof[labels - 1] + spec.overlap * rng.standard_normal((spec.n, prof.shape[1]))
    X = np.clip(np.rint(X), 0, MAX_SCORE)
    order = rng.permutation(spec.n)
    labels = labels[order]
    groups = np.where(labels == 1, "HC", "PD").astype(object)
    return Cohort(X[order], labels, tuple(spec.feature_names), groups)


# ------------------------------------------------------------------ fold plans


@dataclass(frozen=True, eq=False)
class FoldPlan:
    """Fold index (1..folds) of every observation, one row per repeat."""

    assignments: np.ndarray
    folds: int
    seed: int

    @property
    def repeats(self) -> int:
        return self.assignments.shape[0]

    def splits(self, repeat: int):
        """Yield (fold, train_idx, test_idx) for one repeat (0-based)."""
        a = self.assignments[repeat]
        for f in range(1, self.folds + 1):
            yield f, np.flatnonzero(a != f), np.flatnonzero(a == f)


def make_folds(labels, folds: int = 10, repeats: int = 1, seed: int = 0) -> FoldPlan:
    """Stratified fold plan.

    Members of each class are shuffled and laid out class after class; fold
    numbers are then dealt round-robin over that ordering, so every fold holds
    floor or ceil of n_c/folds members of class c.
    """
    labels = np.asarray(labels.stage_labels if isinstance(labels, Cohort) else labels)
    n = labels.shape[0]
    if folds < 2:
        raise ValueError("need at least 2 folds")
    if folds > n:
        raise ValueError(f"{folds} folds requested for {n} observations")
    rng = np.random.default_rng(seed)
    classes = np.unique(labels)
    out = np.empty((repeats, n), dtype=int)
    deal = np.arange(n) % folds + 1
    for r in range(repeats):
        order = np.concatenate([rng.permutation(np.flatnonzero(labels == c)) for c in classes])
        out[r, order] = deal
    return FoldPlan(_frozen(out), folds, seed)


# ------------------------------------------------------------------- summaries


def group_summary(cohort: Cohort, by: str = "group") -> pd.DataFrame:
    """Mean score of every feature within each group (``by="group"``) or
    stage (``by="stage"``); rows are features."""
    if by == "group":
        if cohort.group_labels is None:
            raise CohortError("cohort has no group labels")
        keys = cohort.group_labels
        levels = [g for g in GROUPS if np.any(keys == g)]
    elif by == "stage":
        keys = cohort.stage_labels
        levels = [c for c in STAGES if np.any(keys == c)]
    else:
        raise CohortError(f"unknown grouping {by!r}")
    table = {
        (STAGE_NAMES[k] if by == "stage" else k): cohort.features[keys == k].mean(axis=0)
        for k in levels
    }
    return pd.DataFrame(table, index=pd.Index(cohort.feature_names, name="feature"))


def check_fit_ready(y, n_classes: int = 3):
    counts = np.bincount(np.asarray(y), minlength=n_classes + 1)[1:]
    if np.any(counts == 0):
        missing = [c + 1 for c in np.flatnonzero(counts == 0)]
        raise CohortError(f"class(es) {missing} absent from the training data")
    return counts


def fold_sizes(plan: FoldPlan) -> list[list[int]]:
    return [np.bincount(a, minlength=plan.folds + 1)[1:].tolist() for a in plan.assignments]


__all__ = [
    "Cohort", "CohortError", "FoldPlan", "GeneratorSpec", "STAGES", "UPDRS_FEATURES",
    "default_profiles", "generate_synthetic", "group_summary", "largest_remainder",
    "load_csv", "make_folds", "write_csv",
]
