"""Genetic search over four-gene head architectures.

A chromosome holds base-2 exponents for the head's kernel count, kernel
length, pool size and dense width. Fitness is the test accuracy of the
extended model after one training epoch on a fixed subset split.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from . import dsp, transfer
from .nn import TrainConfig, evaluate, train
from .synthgen import records_to_arrays

log = logging.getLogger(__name__)

GENE_RANGES = ((3, 8), (2, 6), (1, 3), (4, 9))
STRATEGIES = ("topk", "roulette")


@dataclass(frozen=True)
class Chromosome:
    g1: int
    g2: int
    g3: int
    g4: int

    def __post_init__(self):
        for gene, (lo, hi) in zip(self.genes, GENE_RANGES):
            if not lo <= gene <= hi:
                raise ValueError(f"gene {gene} outside [{lo}, {hi}] in {self.genes}")

    @property
    def genes(self):
        return (self.g1, self.g2, self.g3, self.g4)

    @classmethod
    def from_genes(cls, genes):
        return cls(*(int(g) for g in genes))

    @classmethod
    def parse(cls, text):
        parts = [p for p in text.replace("[", "").replace("]", "").split(",") if p.strip()]
        if len(parts) != 4:
            raise ValueError(f"expected four comma-separated genes, got {text!r}")
        return cls.from_genes(int(p) for p in parts)

    def __str__(self):
        return ",".join(str(g) for g in self.genes)


def decode(c):
    """(kernels, kernel_length, pool, units) as powers of two."""
    return tuple(2 ** g for g in c.genes)


def random_chromosome(rng):
    return Chromosome(*(int(rng.integers(lo, hi + 1)) for lo, hi in GENE_RANGES))


@dataclass
class Individual:
    chromosome: Chromosome
    fitness: float = None

    @property
    def evaluated(self):
        return self.fitness is not None


@dataclass
class GAConfig:
    generations: int = 200
    population_size: int = 8
    parent_count: int = 6
    crossover_count: int = 3
    crossover_prob: float = 0.8
    mutation_prob: float = 0.4
    elite_count: int = 2
    parent_strategy: str = "roulette"
    fitness_epochs: int = 1
    fitness_batch_size: int = 50
    subset_size: int = 1000
    step_size: float = 1e-3
    seed: int = 0

    def __post_init__(self):
        if self.parent_strategy not in STRATEGIES:
            raise ValueError(f"parent_strategy must be one of {STRATEGIES}")
        if self.elite_count >= self.population_size:
            raise ValueError("elite_count must be below population_size")
        if self.parent_count % 2:
            raise ValueError("parent_count must be even")
        if self.parent_count < 2 * self.crossover_count:
            raise ValueError("not enough parents for the crossovers")
        if self.generations < 0:
            raise ValueError("generations must be >= 0")
        for name in ("crossover_prob", "mutation_prob"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")


@dataclass
class GenerationLog:
    generation: int
    max_fitness: float
    mean_fitness: float
    best: Chromosome
    fitnesses: list = field(default_factory=list)

    def row(self):
        return [self.generation, self.max_fitness, self.mean_fitness, *self.best.genes,
                *self.fitnesses]


# -- selection operators ----------------------------------------------------

def roulette_draw(fitnesses, k, rng):
    """Indices of ``k`` draws without replacement, chance proportional to fitness.

    Falls back to uniform choice among the remaining entries once their total
    fitness is zero.
    """
    weights = np.asarray(fitnesses, dtype=np.float64).copy()
    if k > weights.shape[0]:
        raise ValueError("cannot draw more individuals than available")
    alive = np.ones(weights.shape[0], dtype=bool)
    chosen = []
    for _ in range(k):
        w = np.where(alive, weights, 0.0)
        total = w.sum()
        p = w / total if total > 0 else alive / alive.sum()
        i = int(rng.choice(weights.shape[0], p=p))
        chosen.append(i)
        alive[i] = False
    return chosen


def select_parents(population, strategy, rng, count=6):
    if len(population) < count:
        raise ValueError(f"population of {len(population)} is smaller than {count}")
    fits = [ind.fitness for ind in population]
    if strategy == "topk":
        # stable sort keeps the lower index first among ties
        order = sorted(range(len(population)), key=lambda i: -fits[i])
        return [population[i] for i in order[:count]]
    if strategy == "roulette":
        return [population[i] for i in roulette_draw(fits, count, rng)]
    raise ValueError(f"unknown parent strategy {strategy!r}")


def splice(a, b, cut):
    """Children swapping every gene from position ``cut`` onward."""
    ga, gb = a.genes, b.genes
    return (Chromosome.from_genes(ga[:cut] + gb[cut:]),
            Chromosome.from_genes(gb[:cut] + ga[cut:]))


def crossover(a, b, rng, prob=0.8):
    if rng.random() < prob:
        return splice(a, b, int(rng.integers(1, 4)))
    return a, b


def mutate(c, rng):
    """Resample one random gene to a different value in its range."""
    pos = int(rng.integers(0, 4))
    lo, hi = GENE_RANGES[pos]
    choices = [v for v in range(lo, hi + 1) if v != c.genes[pos]]
    genes = list(c.genes)
    genes[pos] = choices[int(rng.integers(0, len(choices)))]
    return Chromosome.from_genes(genes)


def survivors(pool, rng, size=8, elite_count=2):
    """Elites by fitness, roulette for the rest, then duplicates replaced."""
    if len(pool) < size:
        raise ValueError(f"pool of {len(pool)} is smaller than {size}")
    order = sorted(range(len(pool)), key=lambda i: -pool[i].fitness)
    elite_idx = order[:elite_count]
    rest = [i for i in range(len(pool)) if i not in elite_idx]
    picks = roulette_draw([pool[i].fitness for i in rest], size - elite_count, rng)
    chosen = [pool[i] for i in elite_idx] + [pool[rest[j]] for j in picks]
    seen = set()
    out = []
    for ind in chosen:
        if ind.chromosome in seen:
            continue
        seen.add(ind.chromosome)
        out.append(ind)
    while len(out) < size:
        fresh = random_chromosome(rng)
        if fresh not in seen:
            seen.add(fresh)
            out.append(Individual(fresh))
    return out


# -- fitness ----------------------------------------------------------------

class FitnessEvaluator:
    """Memoized one-epoch fitness on a fixed train/test split.

    Every evaluation uses the same head seed and shuffle seed, so fitness
    differences come from the architecture alone.
    """

    def __init__(self, trimmed, train_set, test_set, cfg):
        self.trimmed = trimmed
        self.x_train, self.y_train = records_to_arrays(train_set)
        self.x_test, self.y_test = records_to_arrays(test_set)
        self.cfg = cfg
        self.train_config = TrainConfig(epochs=cfg.fitness_epochs,
                                        batch_size=cfg.fitness_batch_size,
                                        step_size=cfg.step_size, seed=cfg.seed)
        self.cache = {}
        self.calls = 0

    def __call__(self, chromosome):
        if chromosome in self.cache:
            return self.cache[chromosome]
        self.calls += 1
        model = transfer.extend(self.trimmed, decode(chromosome), seed=self.cfg.seed)
        train(model, self.x_train, self.y_train, self.train_config)
        acc, _ = evaluate(model, self.x_test, self.y_test)
        self.cache[chromosome] = acc
        log.debug("fitness %s -> %.4f", chromosome, acc)
        return acc


def evaluate_fitness(chromosome, trimmed, train_set, test_set, cfg):
    return FitnessEvaluator(trimmed, train_set, test_set, cfg)(chromosome)


def _memoized(fitness):
    cache = {}

    def lookup(chromosome):
        if chromosome not in cache:
            cache[chromosome] = fitness(chromosome)
        return cache[chromosome]

    return lookup


def _score(population, fitness):
    for ind in population:
        if not ind.evaluated:
            ind.fitness = fitness(ind.chromosome)


def _log_generation(gen, population):
    fits = [ind.fitness for ind in population]
    best = max(range(len(population)), key=lambda i: fits[i])
    return GenerationLog(gen, max(fits), float(np.mean(fits)), population[best].chromosome, fits)


def run_ga(cfg, trimmed, records, fitness=None, on_generation=None):
    """Evolve head architectures; returns (logs, best individual).

    ``records`` are preprocessed; a stratified subset of ``cfg.subset_size``
    is split 80/20 once and reused for every fitness evaluation. A custom
    ``fitness`` callable (chromosome -> float) replaces the training-based
    evaluator, which is useful for operator tests.
    """
    rng = np.random.default_rng(cfg.seed)
    if fitness is None:
        subset = dsp.stratified_subset(records, cfg.subset_size, cfg.seed)
        train_set, test_set = dsp.stratified_split(subset, 0.8, cfg.seed)
        fitness = FitnessEvaluator(trimmed, train_set, test_set, cfg)
    fitness = _memoized(fitness)

    population = []
    seen = set()
    while len(population) < cfg.population_size:
        c = random_chromosome(rng)
        if c not in seen:
            seen.add(c)
            population.append(Individual(c))

    logs = []
    best = None
    for gen in range(cfg.generations + 1):
        _score(population, fitness)
        entry = _log_generation(gen, population)
        logs.append(entry)
        top = max(population, key=lambda ind: ind.fitness)
        if best is None or top.fitness > best.fitness:
            best = Individual(top.chromosome, top.fitness)
        if on_generation is not None:
            on_generation(entry)
        if gen == cfg.generations:
            break

        parents = select_parents(population, cfg.parent_strategy, rng, cfg.parent_count)
        offspring = []
        for k in range(cfg.crossover_count):
            a, b = parents[2 * k].chromosome, parents[2 * k + 1].chromosome
            offspring.extend(crossover(a, b, rng, cfg.crossover_prob))
        if offspring and rng.random() < cfg.mutation_prob:
            j = int(rng.integers(0, len(offspring)))
            offspring[j] = mutate(offspring[j], rng)
        children = [Individual(c) for c in offspring]
        _score(children, fitness)
        population = survivors(population + children, rng, cfg.population_size, cfg.elite_count)
    return logs, best


def write_log(logs, path):
    header = ["generation", "max_fitness", "mean_fitness", "g1", "g2", "g3", "g4"]
    width = max((len(entry.fitnesses) for entry in logs), default=8)
    header += [f"fitness_{i}" for i in range(width)]
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for entry in logs:
            fh.write(",".join(_fmt(v) for v in entry.row()) + "\n")


def read_log(path):
    logs = []
    with open(path) as fh:
        next(fh)
        for line in fh:
            vals = line.strip().split(",")
            logs.append(GenerationLog(int(vals[0]), float(vals[1]), float(vals[2]),
                                      Chromosome.from_genes(vals[3:7]),
                                      [float(v) for v in vals[7:]]))
    return logs


def _fmt(v):
    return repr(float(v)) if isinstance(v, (float, np.floating)) else str(v)
