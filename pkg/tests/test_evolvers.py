import numpy as np
import pytest
from scipy import stats as sps

from cife.evolvers import (
    EvolverConfig,
    ProbabilityModel,
    crossover_at,
    evolve,
    ga_crossover,
    ga_evolve,
    ga_mutate,
    ga_select_roulette,
    mask_from_hex,
    mask_to_hex,
    rank_order,
    umda_evolve,
    umda_sample,
    umda_update,
)
from cife.seeding import derive_rng


def onemax(masks):
    return (~np.atleast_2d(masks)).sum(axis=1).astype(float)


def bernoulli_population(n_rows, n_bits, seed):
    return derive_rng(seed, "onemax-init").random((n_rows, n_bits)) < 0.5


def test_config_defaults_and_validation():
    c = EvolverConfig()
    assert (c.population_size, c.max_generations, c.elitism, c.mutation_rate, c.crossover_rate) == (500, 250, 0.4, 0.05, 0.3)
    assert (c.initial_probability, c.upper_bound, c.lower_bound) == (0.5, 0.95, 0.05)
    assert c.stagnation_limit == 50 and c.n_elite == 200
    with pytest.raises(ValueError):
        EvolverConfig(mutation_rate=1.5)
    with pytest.raises(ValueError):
        EvolverConfig(lower_bound=0.6)
    with pytest.raises(ValueError):
        EvolverConfig(algorithm="PSO")


def test_roulette_uniform_when_fitness_equal():
    rng = np.random.default_rng(0)
    picks = ga_select_roulette(np.arange(5), np.zeros(5), rng, size=10_000)
    assert sps.chisquare(np.bincount(picks, minlength=5)).pvalue > 0.01


def test_roulette_examples():
    rng = np.random.default_rng(1)
    assert ga_select_roulette(np.array([7]), np.array([0.3]), rng) == 7
    picks = ga_select_roulette(np.array([0, 1]), np.array([0.0, 1.0]), rng, size=10_000)
    assert abs(np.mean(picks == 0) - 1.0) <= 0.01


def test_crossover_examples():
    p1, p2 = np.array([1, 1, 1, 0, 0], bool), np.array([0, 0, 0, 1, 1], bool)
    assert crossover_at(p1, p2, 3).tolist() == [True] * 5
    assert crossover_at(np.array([1, 0, 0, 0, 0], bool), np.array([0, 1, 1, 1, 1], bool), 1).tolist() == [True] * 5
    rng = np.random.default_rng(0)
    for _ in range(20):
        assert np.array_equal(ga_crossover(p1, p1, rng, rate=1.0), p1)
    assert np.array_equal(ga_crossover(p1, p2, rng, rate=0.0), p1)
    with pytest.raises(ValueError):
        ga_crossover(np.array([1], bool), np.array([0], bool), rng)


def test_crossover_rate_frequency():
    rng = np.random.default_rng(3)
    p1, p2 = np.ones(10, bool), np.zeros(10, bool)
    changed = np.mean([not ga_crossover(p1, p2, rng, 0.3).all() for _ in range(10_000)])
    assert abs(changed - 0.3) < 0.02


def test_mutation_examples():
    rng = np.random.default_rng(0)
    mask = np.array([1, 0, 1, 1, 0], bool)
    assert np.array_equal(ga_mutate(mask, 0.0, rng), mask)
    assert np.array_equal(ga_mutate(mask, 1.0, rng), ~mask)
    assert ga_mutate(np.ones(4, bool), 1.0, rng, repair_index=2).tolist() == [False, False, True, False]
    flips = [np.sum(ga_mutate(np.zeros(150, bool), 0.05, rng) != 0) for _ in range(10_000)]
    assert abs(np.mean(flips) - 7.5) < 1
    with pytest.raises(ValueError):
        ga_mutate(mask, 2.0, rng)


def test_umda_sampling_rates():
    # the third bit makes empty rows (and therefore repairs) negligible
    model = ProbabilityModel(np.array([0.95, 0.05, 0.95]))
    samples = umda_sample(model, np.random.default_rng(0), size=100_000)
    rates = samples.mean(axis=0)
    assert abs(rates[0] - 0.95) < 0.01 and abs(rates[1] - 0.05) < 0.01
    # with two bits, the 0.05 * 0.95 empty mass is moved onto the repair bit
    two = umda_sample(ProbabilityModel(np.array([0.95, 0.05])), np.random.default_rng(0), size=100_000)
    assert abs(two[:, 0].mean() - (0.95 + 0.05 * 0.95)) < 0.01
    assert two.any(axis=1).all()
    a = umda_sample(model, derive_rng(1, "x"), size=20)
    b = umda_sample(model, derive_rng(1, "x"), size=20)
    assert np.array_equal(a, b)


def test_umda_all_upper_bound_product_law():
    n = 6
    model = ProbabilityModel(np.full(n, 0.95))
    samples = umda_sample(model, np.random.default_rng(2), size=50_000)
    assert abs(samples.all(axis=1).mean() - 0.95**n) < 0.01


def test_umda_update_fixture():
    population = np.array([[1, 1, 0, 0, 1], [1, 0, 1, 0, 1], [0, 1, 1, 1, 0], [0, 0, 0, 1, 1]], bool)
    fitness = np.array([0.1, 0.2, 0.7, 0.9])
    model = umda_update(population, fitness, EvolverConfig())
    assert model.p.tolist() == [0.95, 0.5, 0.5, 0.05, 0.95]
    same = umda_update(np.array([[1, 0, 1]] * 4, bool), np.arange(4.0), EvolverConfig())
    assert same.p.tolist() == [0.95, 0.05, 0.95]
    mid = umda_update(np.array([[1, 0], [0, 1], [1, 1], [0, 0]], bool), np.array([0, 0, 1, 1.0]), EvolverConfig())
    assert mid.p.tolist() == [0.5, 0.5]


def test_rank_order_tie_rules():
    masks = np.array([[1, 1, 0], [0, 1, 0], [1, 0, 0], [0, 0, 1]], bool)
    fitness = np.array([0.2, 0.2, 0.2, 0.1])
    assert rank_order(masks, fitness).tolist() == [3, 1, 2, 0]


def test_hex_roundtrip():
    mask = np.random.default_rng(0).random(150) < 0.3
    assert np.array_equal(mask_from_hex(mask_to_hex(mask), 150), mask)


@pytest.mark.parametrize("algorithm, limit", [("UMDA", 60), ("GA", 100)])
def test_onemax_solved(algorithm, limit):
    for seed in range(10):
        # default run length, so the stagnation window is not shortened by the limit
        trace = evolve(bernoulli_population(500, 50, seed), onemax, EvolverConfig(algorithm=algorithm, seed=seed))
        first_hit = next((g for g, v in enumerate(trace.best_so_far) if v == 0.0), None)
        assert first_hit is not None and first_hit <= limit, f"seed {seed}: {first_hit}"
        assert trace.best_mask.all()
        assert all(a >= b for a, b in zip(trace.best_so_far, trace.best_so_far[1:]))


@pytest.mark.parametrize("algorithm", ["GA", "UMDA"])
def test_constant_fitness_stops_by_stagnation(algorithm):
    config = EvolverConfig(algorithm=algorithm, population_size=30, seed=0)
    trace = evolve(bernoulli_population(30, 12, 0), lambda m: np.zeros(len(m)), config)
    assert trace.termination == "stagnation"
    assert trace.generations_run == 50


def test_ga_elitism_and_population_size():
    sizes = []

    def fitness(masks):
        sizes.append(len(masks))
        return onemax(masks)

    config = EvolverConfig(algorithm="GA", population_size=40, max_generations=15, seed=2)
    trace = ga_evolve(bernoulli_population(40, 30, 2), fitness, config)
    assert sizes[0] == 40 and set(sizes[1:]) == {40 - 16}
    assert all(a >= b for a, b in zip(trace.best_fitness, trace.best_fitness[1:]))


def test_umda_margins_every_generation():
    config = EvolverConfig(population_size=60, max_generations=250, stagnation_fraction=1.0, seed=4)
    rng = np.random.default_rng(0)
    weights = rng.normal(size=40)
    trace = umda_evolve(bernoulli_population(60, 40, 4), lambda m: np.atleast_2d(m) @ weights, config)
    assert trace.generations_run == 250
    assert len(trace.model_range) == 251
    assert all(0.05 <= lo and hi <= 0.95 for lo, hi in trace.model_range)


def test_every_evaluated_individual_nonempty():
    seen = []

    def fitness(masks):
        seen.append(np.atleast_2d(masks).any(axis=1).all())
        return np.atleast_2d(masks).sum(axis=1).astype(float)  # pushes toward empty masks

    for algorithm in ("GA", "UMDA"):
        evolve(bernoulli_population(30, 8, 1), fitness, EvolverConfig(algorithm=algorithm, population_size=30, max_generations=30, seed=1))
    assert all(seen)


@pytest.mark.parametrize("algorithm", ["GA", "UMDA"])
def test_evolution_deterministic(algorithm):
    config = EvolverConfig(algorithm=algorithm, population_size=50, max_generations=20, seed=9)
    init = bernoulli_population(50, 25, 9)
    a, b = evolve(init, onemax, config), evolve(init, onemax, config)
    assert a.to_dict() == b.to_dict()


def test_flat_start_ignores_supplied_population():
    config = EvolverConfig(population_size=30, max_generations=5, seed=3, use_initial_population=False)
    a = umda_evolve(np.zeros((30, 10), bool), onemax, config)
    b = umda_evolve(np.ones((30, 10), bool), onemax, config)
    assert a.to_dict() == b.to_dict()


def test_wrong_population_size():
    with pytest.raises(ValueError):
        evolve(np.ones((3, 4), bool), onemax, EvolverConfig(population_size=5))
