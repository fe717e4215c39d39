"""Real-valued genetic algorithm and classifier hyperparameter tuning.

Each generation keeps the elite individuals, fills a ``crossover_fraction``
share of the remaining slots with arithmetic crossovers of
tournament-selected parents and the rest with adaptive Gaussian mutants.
The mutation step shrinks after a generation without improvement of the
best fitness and grows after one with improvement; mutants are also pushed
along the direction of the last improvement.
"""

from __future__ import annotations

import logging
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .cohort import Cohort, make_folds
from .evaluation import cross_validate
from .registry import ModelSpec

logger = logging.getLogger(__name__)

SHRINK, GROW = 0.5, 1.5


@dataclass
class GAConfig:
    lower: tuple
    upper: tuple
    population_size: int = 20
    generations: int = 50
    crossover_fraction: float = 0.8
    elite_count: int = 2
    seed: int = 0
    mutation_scale: float = 0.1  # initial step, as a fraction of each gene's range
    tournament_size: int = 2

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float)
        hi = np.asarray(self.upper, dtype=float)
        if lo.shape != hi.shape or lo.ndim != 1 or lo.size == 0:
            raise ValueError("lower and upper bounds must be equal-length vectors")
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi)) and np.all(lo <= hi)):
            raise ValueError("bounds must be finite with lower <= upper")
        if not 0.0 <= self.crossover_fraction <= 1.0:
            raise ValueError("crossover_fraction must lie in [0, 1]")
        if not 0 <= self.elite_count < self.population_size:
            raise ValueError("need 0 <= elite_count < population_size")
        if self.generations < 0:
            raise ValueError("generations must be non-negative")
        self.lower, self.upper = tuple(lo.tolist()), tuple(hi.tolist())

    @property
    def n_genes(self) -> int:
        return len(self.lower)


@dataclass
class Individual:
    genes: np.ndarray
    fitness: float = -math.inf


@dataclass
class GAResult:
    best: Individual
    trace: list = field(default_factory=list)  # per generation: best, mean, step

    def best_trace(self) -> list:
        return [row["best"] for row in self.trace]


def _safe(fitness_fn, genes):
    try:
        value = float(fitness_fn(genes))
    except Exception as exc:  # a failing individual is culled, not fatal
        logger.debug("fitness failed for %s: %s", genes, exc)
        return -math.inf
    return value if not math.isnan(value) else -math.inf


def _evaluate(fitness_fn, population, mapper):
    if mapper is None:
        return np.array([_safe(fitness_fn, g) for g in population])
    return np.array(list(mapper(fitness_fn, list(population))))


def _tournament(fit, rng, size):
    picks = rng.integers(0, fit.size, size=size)
    return picks[np.argmax(fit[picks])]


def evolve(fitness_fn, config: GAConfig, mapper=None) -> GAResult:
    """Maximise ``fitness_fn`` over the box ``[lower, upper]``.

    ``mapper(fn, genes_list)`` may evaluate a generation in parallel; it must
    return fitness values in input order and map failures to -inf (see
    ``safe_fitness``). Without it evaluation is serial.
    """
    rng = np.random.default_rng(config.seed)
    lo, hi = np.array(config.lower), np.array(config.upper)
    span = hi - lo
    P, E = config.population_size, config.elite_count
    pop = lo + rng.random((P, config.n_genes)) * span
    fit = _evaluate(fitness_fn, pop, mapper)
    step = config.mutation_scale
    direction = np.zeros(config.n_genes)
    b = int(np.argmax(fit))
    best = Individual(pop[b].copy(), float(fit[b]))
    trace = [_record(0, fit, best, step)]
    n_children = P - E
    n_cross = int(round(config.crossover_fraction * n_children))
    for gen in range(1, config.generations + 1):
        order = np.argsort(-fit, kind="stable")
        children = [pop[i].copy() for i in order[:E]]
        child_fit = [fit[i] for i in order[:E]]
        fresh = []
        for _ in range(n_cross):
            p1 = pop[_tournament(fit, rng, config.tournament_size)]
            p2 = pop[_tournament(fit, rng, config.tournament_size)]
            r = rng.random(config.n_genes)
            fresh.append(r * p1 + (1 - r) * p2)
        for _ in range(n_children - n_cross):
            parent = pop[_tournament(fit, rng, config.tournament_size)]
            z = rng.standard_normal(config.n_genes) + direction
            fresh.append(np.clip(parent + step * span * z, lo, hi))
        if fresh:
            fresh = np.clip(np.array(fresh), lo, hi)
            child_fit.extend(_evaluate(fitness_fn, fresh, mapper))
            children.extend(fresh)
        pop, fit = np.array(children), np.array(child_fit)
        b = int(np.argmax(fit))
        if fit[b] > best.fitness:
            move = (pop[b] - best.genes) / np.where(span > 0, span, 1.0)
            norm = np.linalg.norm(move)
            direction = move / norm if norm > 0 else np.zeros_like(move)
            best = Individual(pop[b].copy(), float(fit[b]))
            step = min(step * GROW, 1.0)
        else:
            step *= SHRINK
        trace.append(_record(gen, fit, best, step))
    return GAResult(best, trace)


def safe_fitness(fitness_fn, genes):
    """Public wrapper for mappers: failures and NaN become -inf."""
    return _safe(fitness_fn, genes)


def _record(gen, fit, best, step):
    finite = fit[np.isfinite(fit)]
    return {
        "generation": gen,
        "best": best.fitness,
        "mean": float(finite.mean()) if finite.size else -math.inf,
        "step": step,
    }


# ------------------------------------------------------------ family schemas

COST_BOUNDS = (0.5, 50.0)
PGM_COST_BOUNDS = (0.5, 1e4)
PROPORTION_BOUNDS = (0.5, 15.0)
COUNT_BOUNDS = (10, 200)
WIDTH_BOUNDS = (2, 128)


@dataclass(frozen=True)
class GeneSchema:
    names: tuple
    lower: tuple
    upper: tuple
    integer: tuple  # names of genes rounded at decode time
    elite_count: int = 2

    def decode(self, genes) -> dict:
        genes = np.asarray(genes, dtype=float)
        if genes.shape != (len(self.names),):
            raise ValueError(f"expected {len(self.names)} genes")
        out = {}
        for name, g in zip(self.names, genes):
            out[name] = int(round(g)) if name in self.integer else float(g)
        return _group(out)


def _group(flat):
    """Collect c1..c3 into ``costs`` and p1..p3 into ``proportions``."""
    out = {}
    for key, prefix in (("costs", "c"), ("proportions", "p"), ("class_costs", "k")):
        keys = [f"{prefix}{i}" for i in (1, 2, 3)]
        if all(k in flat for k in keys):
            out[key] = [flat.pop(k) for k in keys]
    if "h1" in flat:
        out["hidden"] = [flat.pop(h) for h in ("h1", "h2") if h in flat]
    out.update(flat)
    return out


def _costs(prefix="c", bounds=COST_BOUNDS):
    return [(f"{prefix}{i}", *bounds) for i in (1, 2, 3)]


def _schema(genes, integer=(), elite_count=2):
    names, lo, hi = zip(*genes)
    return GeneSchema(tuple(names), tuple(float(v) for v in lo), tuple(float(v) for v in hi),
                      tuple(integer), elite_count)


SCHEMAS = {
    "svm": _schema([("C", 0.1, 100.0), ("gamma", 1e-3, 1.0), *_costs("k")]),
    "adaboost": _schema([*_costs(), ("n_rounds", *COUNT_BOUNDS)], integer=("n_rounds",)),
    "rusboost": _schema([*_costs("p", PROPORTION_BOUNDS), ("n_rounds", *COUNT_BOUNDS)],
                        integer=("n_rounds",), elite_count=8),
    "forest": _schema([*_costs(), ("n_trees", *COUNT_BOUNDS)], integer=("n_trees",)),
    "pgm": _schema(_costs(bounds=PGM_COST_BOUNDS)),
    "nn": _schema([("h1", *WIDTH_BOUNDS)], integer=("h1",)),
    "deepnn": _schema([("h1", *WIDTH_BOUNDS), ("h2", *WIDTH_BOUNDS)], integer=("h1", "h2")),
}


def schema_for(family: str) -> GeneSchema:
    try:
        return SCHEMAS[family]
    except KeyError:
        raise ValueError(f"no tuning schema for {family!r}; choose from {sorted(SCHEMAS)}") from None


def config_for(family: str, **overrides) -> GAConfig:
    s = schema_for(family)
    kw = {"lower": s.lower, "upper": s.upper, "elite_count": s.elite_count}
    kw.update(overrides)
    return GAConfig(**kw)


# ------------------------------------------------------------------ tuning


class CVFitness:
    """Mean per-class F-measure of a decoded individual under a fixed inner
    stratified cross-validation. Picklable, so generations can be evaluated
    in worker processes."""

    def __init__(self, X, y, family, base_params=None, folds=3, inner_seed=0, model_seed=0):
        self.X, self.y = X, y
        self.family = family
        self.schema = schema_for(family)
        self.base_params = dict(base_params or {})
        self.folds, self.inner_seed, self.model_seed = folds, inner_seed, model_seed

    def spec(self, genes):
        params = dict(self.base_params)
        params.update(self.schema.decode(genes))
        return ModelSpec(self.family, params)

    def __call__(self, genes):
        spec = self.spec(genes)
        for attempt in range(2):
            plan = make_folds(self.y, self.folds, 1, self.inner_seed + attempt)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                res = cross_validate((self.X, self.y), spec, plan, seed=self.model_seed)
            if not any(f["excluded"] for f in res.folds):
                return res.aggregate["mean_f"]
        return -math.inf


def _pool_mapper(pool):
    def mapper(fn, genes_list):
        return pool.map(safe_fitness, [fn] * len(genes_list), genes_list)
    return mapper


@dataclass
class TuneResult:
    family: str
    params: dict
    genes: list
    fitness: float
    trace: list

    def to_dict(self) -> dict:
        return {"family": self.family, "params": self.params, "genes": self.genes,
                "fitness": self.fitness, "trace": self.trace}


def tune_classifier(data, family: str, config: GAConfig | None = None, folds: int = 3,
                    inner_seed: int = 0, base_params=None, workers: int = 1) -> TuneResult:
    """Search the family's hyperparameters for the best mean F-measure.

    ``data`` is a Cohort or an (X, y) pair. The returned ``params`` are the
    decoded best genes merged over ``base_params``; ``trace`` has one row per
    generation with the best-so-far and population-mean fitness.
    """
    if isinstance(data, Cohort):
        X, y = np.asarray(data.features, dtype=float), np.asarray(data.stage_labels, dtype=int)
    else:
        X, y = np.asarray(data[0], dtype=float), np.asarray(data[1], dtype=int)
    config = config or config_for(family)
    schema = schema_for(family)
    if config.n_genes != len(schema.names):
        raise ValueError(f"{family} needs {len(schema.names)} genes, config has {config.n_genes}")
    fitness = CVFitness(X, y, family, base_params, folds, inner_seed, config.seed)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            result = evolve(fitness, config, _pool_mapper(pool))
    else:
        result = evolve(fitness, config)
    params = fitness.spec(result.best.genes).resolved()
    return TuneResult(family, params, result.best.genes.tolist(), result.best.fitness,
                      result.trace)
