"""Power/sub-band solvers: greedy assignment, exhaustive oracle and a GA.

Fitness of a power configuration is the network utility after the greedy
per-(cell, sub-band) user choice, which is exact for fixed powers because
every user's SINR depends only on the cell powers.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .netmodel import (
    Allocation,
    NetworkRealization,
    ScenarioConfig,
    feasible_power_vectors,
    served_sinr,
)

__all__ = [
    "GaConfig",
    "SolveResult",
    "SearchSpaceTooLarge",
    "assign_subbands",
    "fitness",
    "batch_fitness",
    "exhaustive_search",
    "GeneticSearch",
    "ga_solve",
    "repair_cell",
]

DEFAULT_SEARCH_CAP = 2_000_000
_CHUNK = 4096


class SearchSpaceTooLarge(RuntimeError):
    """The exhaustive search space exceeds the configured cap."""

    def __init__(self, size: int, cap: int):
        super().__init__(f"exhaustive search space {size} exceeds cap {cap}")
        self.size = size
        self.cap = cap


@dataclass(frozen=True)
class GaConfig:
    population_size: int = 50
    mutation_prob: float = 0.05
    elite_pairs: int = 12
    convergence_eps: float = 1e-6
    patience_generations: int = 10
    max_generations: int = 500
    rng_seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.mutation_prob <= 1.0:
            raise ValueError("mutation_prob must be in [0, 1]")
        if self.elite_pairs < 1 or self.population_size < 2 * self.elite_pairs:
            raise ValueError("need population_size >= 2 * elite_pairs >= 2")
        if self.convergence_eps < 0 or self.patience_generations < 1 or self.max_generations < 1:
            raise ValueError("invalid termination settings")


@dataclass
class SolveResult:
    allocation: Allocation
    fitness_evals: int
    wall_time: float
    method: str
    history: list = field(default_factory=list)


def _sinr_cube(real: NetworkRealization, powers_w, cfg: ScenarioConfig) -> np.ndarray:
    s = served_sinr(real.gain, real.serving, powers_w, real.noise_w)
    return s.reshape(*s.shape[:-2], cfg.num_cells, cfg.users_per_cell, cfg.subbands)


def assign_subbands(real: NetworkRealization, powers_w, cfg: ScenarioConfig) -> np.ndarray:
    """Best local user per (cell, sub-band); ties go to the lowest index."""
    return np.argmax(_sinr_cube(real, powers_w, cfg), axis=-2)


def batch_fitness(real: NetworkRealization, power_idx, cfg: ScenarioConfig) -> np.ndarray:
    """Utility under greedy assignment for a stack ``[N, K, F]`` of level indices."""
    powers = np.asarray(cfg.power_levels)[np.asarray(power_idx)]
    best = _sinr_cube(real, powers, cfg).max(axis=-2)
    return cfg.subband_bandwidth * np.log2(1.0 + cfg.alpha * best).sum(axis=(-2, -1))


def fitness(real: NetworkRealization, power_idx, cfg: ScenarioConfig) -> float:
    return float(batch_fitness(real, np.asarray(power_idx)[None], cfg)[0])


def _allocation(real, power_idx, cfg, utility) -> Allocation:
    power_idx = np.asarray(power_idx, dtype=int).reshape(cfg.num_cells, cfg.subbands)
    powers = np.asarray(cfg.power_levels)[power_idx]
    return Allocation(power_idx, assign_subbands(real, powers, cfg), float(utility))


def exhaustive_search(real: NetworkRealization, cfg: ScenarioConfig, *, cap: int = DEFAULT_SEARCH_CAP) -> SolveResult:
    """Global optimum over all feasible per-cell power vectors.

    Candidates are scanned in lexicographic order of the per-cell vector
    indices; among equal utilities the lexicographically smallest wins.

    Raises
    ------
    SearchSpaceTooLarge
        If ``len(feasible_power_vectors) ** K`` exceeds ``cap``.
    """
    start = time.perf_counter()
    vectors = np.array(feasible_power_vectors(cfg), dtype=int)
    v, k = len(vectors), cfg.num_cells
    size = v**k
    if size > cap:
        raise SearchSpaceTooLarge(size, cap)

    radix = v ** np.arange(k - 1, -1, -1)
    best_val, best_code = -np.inf, 0
    for lo in range(0, size, _CHUNK):
        codes = np.arange(lo, min(lo + _CHUNK, size))
        digits = (codes[:, None] // radix) % v
        vals = batch_fitness(real, vectors[digits], cfg)
        i = int(np.argmax(vals))
        if vals[i] > best_val:
            best_val, best_code = float(vals[i]), int(codes[i])
    digits = (best_code // radix) % v
    alloc = _allocation(real, vectors[digits], cfg, best_val)
    return SolveResult(alloc, size, time.perf_counter() - start, "exhaustive")


def repair_cell(genes: np.ndarray, levels: np.ndarray, budget: float) -> np.ndarray:
    """Downgrade the largest gene (lowest position on ties) until within budget."""
    genes = genes.copy()
    while levels[genes].sum() > budget:
        j = int(np.argmax(genes))
        if genes[j] == 0:
            break
        genes[j] -= 1
    return genes


class GeneticSearch:
    """Evolution state for one realization.

    A chromosome is the ``K * F`` concatenation of per-cell level indices.
    Each call to :meth:`step` runs one generation: elite selection, pairwise
    single-point crossover, mutation with feasibility repair, and admission
    of offspring that beat both parents (each replaces the current worst).
    Fitness values are memoised; ``evals`` counts distinct chromosomes scored.
    """

    def __init__(self, real, cfg: ScenarioConfig, ga: GaConfig, *, initial_population=None):
        self.real = real
        self.cfg = cfg
        self.ga = ga
        self.rng = np.random.default_rng(ga.rng_seed)
        self.levels = np.asarray(cfg.power_levels)
        self.budget = cfg.max_power * (1.0 + 1e-12)
        self._cache: dict[bytes, float] = {}
        self.evals = 0
        if initial_population is None:
            vectors = np.array(feasible_power_vectors(cfg), dtype=int)
            picks = self.rng.integers(len(vectors), size=(ga.population_size, cfg.num_cells))
            pop = vectors[picks].reshape(ga.population_size, -1)
        else:
            pop = np.array(initial_population, dtype=int).reshape(len(initial_population), -1)
        self.population = pop
        self.scores = self._score(pop)
        self.generation = 0
        b = int(np.argmax(self.scores))
        self.best = pop[b].copy()
        self.best_fitness = float(self.scores[b])
        self.history = [self.best_fitness]

    def _score(self, chroms: np.ndarray) -> np.ndarray:
        keys = [c.tobytes() for c in chroms]
        todo = {}
        for key, c in zip(keys, chroms):
            if key not in self._cache and key not in todo:
                todo[key] = c
        if todo:
            batch = np.array(list(todo.values())).reshape(len(todo), self.cfg.num_cells, self.cfg.subbands)
            vals = batch_fitness(self.real, batch, self.cfg)
            self._cache.update(zip(todo.keys(), vals.tolist()))
            self.evals += len(todo)
        return np.array([self._cache[k] for k in keys])

    def _select_pairs(self) -> list[tuple[int, int]]:
        n_elite = min(2 * self.ga.elite_pairs, len(self.population))
        order = np.lexsort((np.arange(len(self.scores)), -self.scores))
        elite = order[:n_elite]
        w = self.scores[elite] - self.scores[elite].min()
        w = w / w.sum() if w.sum() > 0 else np.full(n_elite, 1.0 / n_elite)
        pairs = []
        for _ in range(self.ga.elite_pairs):
            if n_elite < 2:
                pairs.append((elite[0], elite[0]))
                continue
            p = w if np.count_nonzero(w) >= 2 else None
            a, b = self.rng.choice(elite, size=2, replace=False, p=p)
            pairs.append((int(a), int(b)))
        return pairs

    def _mutate(self, child: np.ndarray) -> np.ndarray:
        f = self.cfg.subbands
        n_levels = len(self.levels)
        hits = np.flatnonzero(self.rng.random(child.size) < self.ga.mutation_prob)
        for g in hits:
            cell = slice(g - g % f, g - g % f + f)
            rest = self.levels[child[cell]].sum() - self.levels[child[g]]
            ok = np.flatnonzero(rest + self.levels <= self.budget)
            child[g] = self.rng.choice(ok) if ok.size else self.rng.integers(n_levels)
        return child

    def _repair(self, child: np.ndarray) -> np.ndarray:
        f = self.cfg.subbands
        for k in range(self.cfg.num_cells):
            child[k * f:(k + 1) * f] = repair_cell(child[k * f:(k + 1) * f], self.levels, self.budget)
        return child

    def step(self) -> float:
        """Run one generation and return the best-ever fitness."""
        length = self.population.shape[1]
        parents, children = [], []
        for a, b in self._select_pairs():
            cut = int(self.rng.integers(1, length)) if length > 1 else 0
            pa, pb = self.population[a], self.population[b]
            for child in (np.concatenate([pa[:cut], pb[cut:]]), np.concatenate([pb[:cut], pa[cut:]])):
                children.append(self._repair(self._mutate(child)))
                parents.append((a, b))
        kids = np.array(children)
        kid_scores = self._score(kids)
        for child, score, (a, b) in zip(kids, kid_scores, parents):
            # parents are looked up after earlier replacements in this generation
            if score > max(self.scores[a], self.scores[b]):
                worst = int(np.argmin(self.scores))
                self.population[worst] = child
                self.scores[worst] = score
                if score > self.best_fitness:
                    self.best_fitness = float(score)
                    self.best = child.copy()
        self.generation += 1
        self.history.append(self.best_fitness)
        return self.best_fitness

    def run(self) -> None:
        stall = 0
        while self.generation < self.ga.max_generations:
            prev = self.best_fitness
            self.step()
            if self.best_fitness - prev <= self.ga.convergence_eps * abs(prev):
                stall += 1
                if stall >= self.ga.patience_generations:
                    break
            else:
                stall = 0


def ga_solve(real: NetworkRealization, cfg: ScenarioConfig, ga: GaConfig = GaConfig(), *, initial_population=None) -> SolveResult:
    start = time.perf_counter()
    search = GeneticSearch(real, cfg, ga, initial_population=initial_population)
    search.run()
    alloc = _allocation(real, search.best, cfg, search.best_fitness)
    return SolveResult(alloc, search.evals, time.perf_counter() - start, "ga", search.history)
