"""Genetic algorithm and UMDA-with-margins over binary ensemble masks.

Both optimisers minimise a vectorised fitness function that maps a
(population, n) boolean array to a fitness vector. Random streams are drawn
per generation from the master seed, so a run is a pure function of
(initial population, fitness function, config).
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .population_init import repair
from .seeding import derive_rng


@dataclass(frozen=True)
class EvolverConfig:
    algorithm: str = "UMDA"
    population_size: int = 500
    max_generations: int = 250
    stagnation_fraction: float = 0.20
    elitism: float = 0.40
    mutation_rate: float = 0.05
    crossover_rate: float = 0.30
    initial_probability: float = 0.50
    upper_bound: float = 0.95
    lower_bound: float = 0.05
    selection_fraction: float = 0.50
    seed: int = 0
    use_initial_population: bool = True
    repair_index: int = 0
    roulette_epsilon: float = 1e-6

    def __post_init__(self):
        if self.algorithm not in ("GA", "UMDA"):
            raise ValueError(f"algorithm must be GA or UMDA, not {self.algorithm!r}")
        for name in ("stagnation_fraction", "elitism", "mutation_rate", "crossover_rate", "selection_fraction"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if not self.lower_bound < self.initial_probability < self.upper_bound:
            raise ValueError("need lower_bound < initial_probability < upper_bound")
        if self.population_size < 1 or self.max_generations < 1:
            raise ValueError("population_size and max_generations must be positive")

    @property
    def stagnation_limit(self) -> int:
        return max(1, math.ceil(self.stagnation_fraction * self.max_generations))

    @property
    def n_elite(self) -> int:
        return math.ceil(self.elitism * self.population_size)


@dataclass(frozen=True)
class ProbabilityModel:
    p: np.ndarray
    lower_bound: float = 0.05
    upper_bound: float = 0.95

    def within_bounds(self) -> bool:
        return bool(np.all((self.p >= self.lower_bound) & (self.p <= self.upper_bound)))


@dataclass
class EvolutionTrace:
    algorithm: str
    best_fitness: list = field(default_factory=list)  # best of each generation's population
    mean_fitness: list = field(default_factory=list)
    best_so_far: list = field(default_factory=list)
    stagnation: list = field(default_factory=list)
    model_range: list = field(default_factory=list)  # UMDA (min p, max p) after each update
    best_mask: np.ndarray | None = None
    best_value: float = math.inf
    termination: str = ""
    evaluations: int = 0

    @property
    def generations_run(self) -> int:
        return len(self.best_fitness) - 1

    def to_dict(self) -> dict:
        return {
            "algorithm": self.algorithm,
            "generations_run": self.generations_run,
            "termination": self.termination,
            "evaluations": self.evaluations,
            "best_value": self.best_value,
            "best_mask": mask_to_hex(self.best_mask),
            "best_size": int(self.best_mask.sum()),
            "n_bits": int(self.best_mask.size),
            "best_fitness": self.best_fitness,
            "mean_fitness": self.mean_fitness,
            "best_so_far": self.best_so_far,
        }


def mask_to_hex(mask) -> str:
    return np.packbits(np.asarray(mask, dtype=bool)).tobytes().hex()


def mask_from_hex(text: str, n_bits: int) -> np.ndarray:
    return np.unpackbits(np.frombuffer(bytes.fromhex(text), dtype=np.uint8))[:n_bits].astype(bool)


def rank_order(masks: np.ndarray, fitness: np.ndarray) -> np.ndarray:
    """Indices sorted by fitness, then fewer active bits, then lexicographic mask."""
    packed = np.packbits(masks, axis=1)
    keys = [packed[:, c] for c in range(packed.shape[1] - 1, -1, -1)]
    keys += [masks.sum(axis=1), fitness]
    return np.lexsort(keys)


# ---------------------------------------------------------------- GA operators


def ga_select_roulette(population, fitnesses, rng, size=None, epsilon: float = 1e-6):
    """Fitness-proportional selection for minimisation: weight = max_f - f + epsilon.

    Returns selected individuals (or rows, when ``size`` is given).
    """
    idx = roulette_indices(fitnesses, rng, size, epsilon)
    return np.asarray(population)[idx]


def roulette_indices(fitnesses, rng, size=None, epsilon: float = 1e-6):
    f = np.asarray(fitnesses, dtype=float)
    w = f.max() - f + epsilon
    return rng.choice(f.size, size=size, p=w / w.sum())


def crossover_at(parent1, parent2, cut: int) -> np.ndarray:
    """parent1[:cut] followed by parent2[cut:]."""
    return np.concatenate([parent1[:cut], parent2[cut:]])


def ga_crossover(parent1, parent2, rng, rate: float = 0.30) -> np.ndarray:
    """Single-point crossover applied with probability ``rate``; otherwise a copy of parent1."""
    parent1 = np.asarray(parent1, dtype=bool)
    parent2 = np.asarray(parent2, dtype=bool)
    if parent1.shape != parent2.shape or parent1.size < 2:
        raise ValueError("parents must have equal length >= 2")
    if rng.random() < rate:
        return crossover_at(parent1, parent2, int(rng.integers(1, parent1.size)))
    return parent1.copy()


def ga_mutate(mask, mutation_rate: float, rng, repair_index: int = 0) -> np.ndarray:
    """Flip each bit independently with ``mutation_rate``; repair an all-zero result."""
    if not 0.0 <= mutation_rate <= 1.0:
        raise ValueError("mutation_rate must lie in [0, 1]")
    mask = np.asarray(mask, dtype=bool)
    out = mask ^ (rng.random(mask.shape) < mutation_rate)
    return repair(np.atleast_2d(out), repair_index).reshape(mask.shape)


def _offspring(population, fitness, n_children, config, rng):
    n = population.shape[1]
    p1 = population[roulette_indices(fitness, rng, n_children, config.roulette_epsilon)]
    p2 = population[roulette_indices(fitness, rng, n_children, config.roulette_epsilon)]
    cross = rng.random(n_children) < config.crossover_rate
    cuts = rng.integers(1, max(n, 2), size=n_children)
    take_first = (np.arange(n)[None, :] < cuts[:, None]) | ~cross[:, None]
    children = np.where(take_first, p1, p2)
    children ^= rng.random(children.shape) < config.mutation_rate
    return repair(children, config.repair_index)


# ---------------------------------------------------------------- UMDA operators


def umda_sample(model: ProbabilityModel, rng, size: int | None = None, repair_index: int = 0) -> np.ndarray:
    """Independent Bernoulli draw per bit from the marginals; all-zero rows repaired."""
    shape = (1 if size is None else size, model.p.size)
    masks = repair(rng.random(shape) < model.p[None, :], repair_index)
    return masks[0] if size is None else masks


def umda_update(population, fitnesses, config: EvolverConfig) -> ProbabilityModel:
    """Marginal bit frequencies of the fittest ``selection_fraction`` share, clamped to the margins."""
    population = np.asarray(population, dtype=bool)
    order = rank_order(population, np.asarray(fitnesses, dtype=float))
    n_sel = max(1, int(round(config.selection_fraction * population.shape[0])))
    freq = population[order[:n_sel]].mean(axis=0)
    return ProbabilityModel(np.clip(freq, config.lower_bound, config.upper_bound), config.lower_bound, config.upper_bound)


# ---------------------------------------------------------------- loops


class _Tracker:
    def __init__(self, trace: EvolutionTrace, config: EvolverConfig):
        self.trace = trace
        self.config = config
        self.stale = 0

    def record(self, masks, fitness) -> bool:
        """Log one evaluated generation; True when the run should stop."""
        t = self.trace
        t.evaluations += masks.shape[0]
        top = rank_order(masks, fitness)[0]
        key = (float(fitness[top]), int(masks[top].sum()), np.packbits(masks[top]).tobytes())
        # the incumbent is replaced only on strict fitness improvement; ties
        # between generations keep the earlier mask
        improved = t.best_mask is None or key[0] < t.best_value
        if improved:
            t.best_mask = masks[top].copy()
            t.best_value = key[0]
        first = len(t.best_fitness) == 0
        self.stale = 0 if improved or first else self.stale + 1
        t.best_fitness.append(float(fitness[top]))
        t.mean_fitness.append(float(np.mean(fitness)))
        t.best_so_far.append(t.best_value)
        t.stagnation.append(self.stale)
        if self.stale >= self.config.stagnation_limit:
            t.termination = "stagnation"
            return True
        if len(t.best_fitness) - 1 >= self.config.max_generations:
            t.termination = "max_generations"
            return True
        return False


def _check_init(init_population, config):
    pop = np.array(init_population, dtype=bool)
    if pop.ndim != 2 or pop.shape[0] != config.population_size:
        raise ValueError(f"initial population must have {config.population_size} rows")
    return repair(pop, config.repair_index)


def ga_evolve(init_population, fitness_fn, config: EvolverConfig) -> EvolutionTrace:
    """Elitist GA: the top ``n_elite`` survive, the rest are roulette-crossover-mutation offspring."""
    population = _check_init(init_population, config)
    fitness = np.asarray(fitness_fn(population), dtype=float)
    trace = EvolutionTrace("GA")
    tracker = _Tracker(trace, config)
    done = tracker.record(population, fitness)
    n_elite = min(config.n_elite, config.population_size)
    gen = 0
    while not done:
        gen += 1
        rng = derive_rng(config.seed, "ga", gen)
        order = rank_order(population, fitness)
        elites, elite_fit = population[order[:n_elite]], fitness[order[:n_elite]]
        children = _offspring(population, fitness, config.population_size - n_elite, config, rng)
        child_fit = np.asarray(fitness_fn(children), dtype=float) if children.size else np.empty(0)
        population = np.vstack([elites, children])
        fitness = np.concatenate([elite_fit, child_fit])
        # only the children are new evaluations
        trace.evaluations -= n_elite
        done = tracker.record(population, fitness)
    return trace


def umda_evolve(init_population, fitness_fn, config: EvolverConfig) -> EvolutionTrace:
    """UMDA with margins.

    Generation 0 evaluates the supplied population and, when
    ``config.use_initial_population`` is set, learns the first model from it.
    Otherwise generation 0 is sampled from the flat ``initial_probability``
    model. Each later generation samples a fresh population from the model,
    evaluates it and re-estimates the marginals from its fittest share.
    """
    trace = EvolutionTrace("UMDA")
    tracker = _Tracker(trace, config)
    if config.use_initial_population:
        population = _check_init(init_population, config)
    else:
        n = np.asarray(init_population).shape[1]
        flat = ProbabilityModel(np.full(n, config.initial_probability), config.lower_bound, config.upper_bound)
        population = umda_sample(flat, derive_rng(config.seed, "umda", 0), config.population_size, config.repair_index)
    fitness = np.asarray(fitness_fn(population), dtype=float)
    done = tracker.record(population, fitness)
    model = umda_update(population, fitness, config)
    gen = 0
    while True:
        if not model.within_bounds():
            raise AssertionError(f"UMDA marginals left [{config.lower_bound}, {config.upper_bound}]")
        trace.model_range.append((float(model.p.min()), float(model.p.max())))
        if done:
            break
        gen += 1
        population = umda_sample(model, derive_rng(config.seed, "umda", gen), config.population_size, config.repair_index)
        fitness = np.asarray(fitness_fn(population), dtype=float)
        done = tracker.record(population, fitness)
        model = umda_update(population, fitness, config)
    return trace


def evolve(init_population, fitness_fn, config: EvolverConfig) -> EvolutionTrace:
    if config.algorithm == "GA":
        return ga_evolve(init_population, fitness_fn, config)
    return umda_evolve(init_population, fitness_fn, config)


def config_dict(config: EvolverConfig) -> dict:
    return asdict(config)
