"""Core engine: a hierarchy of cooperating sub-populations, each evolving an
integer assignment string over its own slice of the problem, merged upward by
cross-level crossover.

Sub-populations are stored structure-of-arrays (one gene matrix plus fitness
vectors per population) so that offspring evaluation can be batched through
numpy. The public operators (`uniform_crossover`, `mutate`, ...) work on
`Individual` views backed by the same array routines the generation loop uses.

All randomness flows through a single `numpy.random.Generator` per run, so a
run is a pure function of (problem, topology, config, seed, strategies).
"""

from __future__ import annotations

import hashlib
import json
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Hashable, Optional, Sequence

import numpy as np

GENE_DTYPE = np.int32

# Probability that an offspring of a non-bottom population is produced by
# cross-level crossover rather than within-population uniform crossover.
CROSS_LEVEL_PROB = 0.5


class ConfigurationError(ValueError):
    """Topology or configuration breaks an engine invariant."""


class InstanceError(ValueError):
    """A problem instance is unusable (e.g. a gene with no feasible allele)."""


# ---------------------------------------------------------------------------
# sense helpers ("min" for cost-like objectives, "max" for revenue-like)

def penalize(raw, violation, weight, sense):
    """Compose penalized fitness from the raw objective and the violation."""
    if sense == "min":
        return raw + weight * violation
    return raw - weight * violation


def is_better(a, b, sense):
    return a < b if sense == "min" else a > b


def better_of(a, b, sense):
    return min(a, b) if sense == "min" else max(a, b)


def argbest(values: np.ndarray, sense: str) -> int:
    """Index of the best value; ties resolve to the lowest index."""
    return int(np.argmin(values)) if sense == "min" else int(np.argmax(values))


# ---------------------------------------------------------------------------
# domain types


class GeneMask:
    """An ordered set of global gene indices owned by one sub-population."""

    __slots__ = ("members", "_set")

    def __init__(self, members: Sequence[int]):
        arr = np.asarray(sorted(int(m) for m in members), dtype=np.int64)
        if len(set(arr.tolist())) != len(arr):
            raise ConfigurationError("gene mask contains duplicate indices")
        if len(arr) and arr[0] < 0:
            raise ConfigurationError("gene mask contains negative indices")
        self.members = arr
        self._set = frozenset(arr.tolist())

    def __len__(self) -> int:
        return len(self.members)

    def __eq__(self, other) -> bool:
        return isinstance(other, GeneMask) and self._set == other._set

    def __hash__(self) -> int:
        return hash(self._set)

    def __repr__(self) -> str:
        return f"GeneMask({self.members.tolist()})"

    def issubset(self, other: "GeneMask") -> bool:
        return self._set <= other._set

    def positions_in(self, other: "GeneMask") -> np.ndarray:
        """Positions of this mask's members inside `other` (which contains it)."""
        if not self.issubset(other):
            raise ValueError("mask is not contained in the target mask")
        return np.searchsorted(other.members, self.members)

    @staticmethod
    def full(length: int) -> "GeneMask":
        return GeneMask(range(length))


@dataclass
class Individual:
    """One assignment string over a mask, with cached fitness terms.

    `penalized` is fixed at evaluation time: it equals
    penalize(raw, violation, w, sense) for the penalty weight w in force when
    the individual was evaluated, and is never rewritten afterwards.
    """

    genes: np.ndarray
    mask: GeneMask
    raw: float = math.nan
    violation: float = math.nan
    penalized: float = math.nan

    def copy(self) -> "Individual":
        return Individual(self.genes.copy(), self.mask, self.raw,
                          self.violation, self.penalized)

    @property
    def feasible(self) -> bool:
        return self.violation == 0.0


@dataclass
class PenaltyController:
    """Constraint-violation weight adapted from the gap between the best and
    the best feasible member of a population."""

    weight: float
    w_min: float = 1.0
    w_max: float = 1e6
    growth: float = 1.1
    decay: float = 0.99
    delta: float = 1.0
    # raw objectives of last generation's best overall / best feasible member
    last_best_raw: float = math.nan
    last_best_feasible_raw: float = math.nan

    def clamp(self) -> None:
        self.weight = min(max(self.weight, self.w_min), self.w_max)


@dataclass
class PopulationSpec:
    """One entry of a pyramid topology, supplied by a problem module."""

    pop_id: int
    mask: GeneMask
    level: int
    lower_partners: tuple[int, ...]
    size: int
    eval_key: Hashable  # problem-specific sub-fitness selector; "full" at the top


@dataclass
class SubPopulation:
    pop_id: int
    mask: GeneMask
    level: int
    lower_partners: tuple[int, ...]
    size: int
    eval_key: Hashable
    sense: str
    genes: np.ndarray  # (size, len(mask)) int32
    raw: np.ndarray  # (size,)
    violation: np.ndarray
    penalized: np.ndarray
    penalty: PenaltyController
    best_ever: Optional[Individual] = None
    stale_generations: int = 0
    # bottom populations tiling the complement of `mask`, or None if the mask
    # is full / no tiling exists
    complement_pops: Optional[tuple[int, ...]] = None
    version: int = 0

    def individual(self, index: int) -> Individual:
        return Individual(self.genes[index].copy(), self.mask,
                          float(self.raw[index]), float(self.violation[index]),
                          float(self.penalized[index]))

    def best_index(self) -> int:
        return argbest(self.penalized, self.sense)


@dataclass
class PyramidConfig:
    total_population: int = 1000
    sub_population_size: int = 100
    top_population_size: Optional[int] = None  # None: total minus the sub-populations
    uniform_p: float = 0.66
    mutation_rate: float = 0.01
    replacement_fraction: float = 0.90
    stagnation_limit: int = 50
    sense: str = "min"
    rng_seed: int = 0
    penalty_growth: float = 1.1
    penalty_decay: float = 0.99
    penalty_delta: float = 1.0
    penalty_min: float = 1.0
    penalty_max: float = 1e6
    # None: start each population at its mean per-gene raw objective magnitude
    penalty_init: Optional[float] = None
    max_generations: Optional[int] = None
    max_seconds: Optional[float] = None

    def validate(self) -> None:
        if not (0 < self.uniform_p <= 1):
            raise ConfigurationError("uniform_p must be in (0, 1]")
        if not (0 <= self.mutation_rate <= 1):
            raise ConfigurationError("mutation_rate must be in [0, 1]")
        if not (0 < self.replacement_fraction < 1):
            raise ConfigurationError("replacement_fraction must be in (0, 1)")
        if self.stagnation_limit < 1:
            raise ConfigurationError("stagnation_limit must be >= 1")
        if self.sense not in ("min", "max"):
            raise ConfigurationError("sense must be 'min' or 'max'")

    def digest(self) -> str:
        payload = {k: getattr(self, k) for k in sorted(self.__dataclass_fields__)}
        blob = json.dumps(payload, sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


@dataclass
class PyramidState:
    problem: "ProblemDefinition"
    config: PyramidConfig
    populations: list[SubPopulation]
    generation: int = 0
    grid: Optional[object] = None  # ToroidalGrid, built on first use of strategy D
    _rank_cache: dict = field(default_factory=dict, repr=False)

    @property
    def sense(self) -> str:
        return self.config.sense

    @property
    def top(self) -> SubPopulation:
        return self.populations[-1]

    def rank_table(self, pop: SubPopulation):
        """(order best->worst, cumulative linear rank weights), cached per version."""
        key = pop.pop_id
        cached = self._rank_cache.get(key)
        if cached is not None and cached[0] == pop.version:
            return cached[1], cached[2]
        order, cum = rank_table(pop.penalized, pop.sense)
        self._rank_cache[key] = (pop.version, order, cum)
        return order, cum


class ProblemDefinition:
    """Interface the engine expects from a problem module.

    Concrete problems provide feasible allele tables per gene, batched
    (sub-)fitness evaluation keyed by the topology's eval keys, and a default
    pyramid topology.
    """

    sense: str
    full_length: int
    instance_id: str
    # (full_length,) number of feasible alleles per gene
    allele_counts: np.ndarray
    # (full_length, max_count) feasible alleles, padded with 0
    allele_table: np.ndarray

    def evaluate_batch(self, eval_key: Hashable, mask: GeneMask,
                       genes: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """(raw, violation) vectors for a (batch, len(mask)) gene matrix."""
        raise NotImplementedError

    def default_topology(self, config: PyramidConfig) -> list[PopulationSpec]:
        raise NotImplementedError

    # -- shared helpers -----------------------------------------------------

    def random_genes(self, mask: GeneMask, count: int,
                     rng: np.random.Generator) -> np.ndarray:
        members = mask.members
        picks = rng.integers(0, self.allele_counts[members], size=(count, len(members)))
        return self.allele_table[members, picks].astype(GENE_DTYPE)

    def evaluate_full_batch(self, genes: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return self.evaluate_batch("full", GeneMask.full(self.full_length), genes)


# ---------------------------------------------------------------------------
# ranking and selection


def ranking(penalized: np.ndarray, sense: str) -> np.ndarray:
    """Indices sorted best-to-worst; fitness ties broken by lower index."""
    keys = penalized if sense == "min" else -penalized
    return np.lexsort((np.arange(len(keys)), keys))


def rank_table(penalized: np.ndarray, sense: str) -> tuple[np.ndarray, np.ndarray]:
    """Best-to-worst order plus cumulative linear rank weights.

    The best of n individuals carries weight n, the worst weight 1; tied
    fitnesses share the mean weight of their positions, so equally fit
    individuals are selected with equal probability.
    """
    n = len(penalized)
    order = ranking(penalized, sense)
    keys = penalized[order]
    position_weights = np.arange(n, 0, -1, dtype=np.float64)
    bounds = np.concatenate(([0], np.flatnonzero(np.diff(keys) != 0) + 1))
    counts = np.diff(np.concatenate((bounds, [n])))
    weights = np.repeat(np.add.reduceat(position_weights, bounds) / counts, counts)
    return order, np.cumsum(weights)


def _roulette(order: np.ndarray, cum: np.ndarray, rng: np.random.Generator) -> int:
    """One linear-rank roulette draw given a precomputed rank table."""
    u = rng.random() * cum[-1]
    pos = int(np.searchsorted(cum, u, side="right"))
    if pos >= len(order):
        pos = len(order) - 1
    return int(order[pos])


def _roulette_many(order: np.ndarray, cum: np.ndarray, count: int,
                   rng: np.random.Generator) -> np.ndarray:
    u = rng.random(count) * cum[-1]
    pos = np.minimum(np.searchsorted(cum, u, side="right"), len(order) - 1)
    return order[pos]


def rank_roulette_select(pop: SubPopulation, rng: np.random.Generator) -> int:
    """Roulette selection on linear rank weights: the best of n individuals
    gets weight n, the worst weight 1, ties share their mean weight."""
    if pop.size == 0:
        raise ValueError("cannot select from an empty population")
    order, cum = rank_table(pop.penalized, pop.sense)
    return _roulette(order, cum, rng)


# ---------------------------------------------------------------------------
# variation operators


def _uniform_pair(genes_a: np.ndarray, genes_b: np.ndarray, p: float,
                  rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    take_a = rng.random(len(genes_a)) < p
    child1 = np.where(take_a, genes_a, genes_b).astype(GENE_DTYPE)
    child2 = np.where(take_a, genes_b, genes_a).astype(GENE_DTYPE)
    return child1, child2


def uniform_crossover(parent_a: Individual, parent_b: Individual, p: float,
                      rng: np.random.Generator) -> tuple[Individual, Individual]:
    """Parameterised uniform crossover producing the complementary child pair.

    Child 1 takes each gene from parent_a with probability p, child 2 makes
    the opposite choice at every position.
    """
    if parent_a.mask != parent_b.mask:
        raise ValueError("uniform crossover requires parents on the same gene mask")
    c1, c2 = _uniform_pair(parent_a.genes, parent_b.genes, p, rng)
    return Individual(c1, parent_a.mask), Individual(c2, parent_a.mask)


def _cross_level_genes(lower_genes: np.ndarray, lower_mask: GeneMask,
                       upper_genes: np.ndarray, upper_mask: GeneMask) -> np.ndarray:
    child = upper_genes.copy()
    if len(lower_mask):
        child[lower_mask.positions_in(upper_mask)] = lower_genes
    return child


def _cut_point_genes(lower_genes: np.ndarray, upper_genes: np.ndarray,
                     cut: int) -> np.ndarray:
    child = upper_genes.copy()
    child[:cut] = lower_genes[:cut]
    return child


def cross_level_crossover(lower: Individual, upper: Individual,
                          rng: Optional[np.random.Generator] = None,
                          cut: Optional[int] = None) -> Individual:
    """Transplant a whole sub-solution into a larger one.

    The child carries the upper parent's mask; genes at positions covered by
    the lower parent's mask come from the lower parent, everything else from
    the upper parent. When both masks are equal there is no subset boundary,
    so a single cut point on the shared gene ordering is used instead (drawn
    from `rng` unless `cut` is given).
    """
    if not lower.mask.issubset(upper.mask):
        raise ValueError("lower parent's mask must be contained in the upper parent's")
    if lower.mask == upper.mask and len(lower.mask):
        if cut is None:
            if rng is None:
                raise ValueError("equal-mask crossover needs a cut point or an rng")
            cut = int(rng.integers(0, len(upper.mask) + 1))
        genes = _cut_point_genes(lower.genes, upper.genes, cut)
    else:
        genes = _cross_level_genes(lower.genes, lower.mask, upper.genes, upper.mask)
    return Individual(genes, upper.mask)


def _mutate_batch(genes: np.ndarray, mask: GeneMask, rate: float,
                  problem: ProblemDefinition, rng: np.random.Generator) -> np.ndarray:
    """Re-initialise each gene with probability `rate`, in its feasible range."""
    if rate <= 0.0:
        return genes
    members = mask.members
    hit = rng.random(genes.shape) < rate
    picks = rng.integers(0, problem.allele_counts[members], size=genes.shape)
    fresh = problem.allele_table[members, picks]
    return np.where(hit, fresh, genes).astype(GENE_DTYPE)


def mutate(child: Individual, rate: float, problem: ProblemDefinition,
           rng: np.random.Generator) -> Individual:
    genes = _mutate_batch(child.genes[None, :], child.mask, rate, problem, rng)[0]
    return Individual(genes, child.mask)


# ---------------------------------------------------------------------------
# initialisation


def _validate_topology(problem: ProblemDefinition, topology: list[PopulationSpec],
                       config: PyramidConfig) -> None:
    if not topology:
        raise ConfigurationError("topology is empty")
    full = GeneMask.full(problem.full_length)
    ids = [spec.pop_id for spec in topology]
    if ids != list(range(len(topology))):
        raise ConfigurationError("population ids must be 0..n-1 in order")
    by_id = {spec.pop_id: spec for spec in topology}
    top = topology[-1]
    if top.mask != full:
        raise ConfigurationError("the top population's mask must cover every gene")
    for spec in topology:
        if len(spec.mask) == 0:
            raise ConfigurationError(f"population {spec.pop_id} has an empty mask")
        if np.any(spec.mask.members >= problem.full_length):
            raise ConfigurationError(f"population {spec.pop_id} mask exceeds problem size")
        if spec.size < 1:
            raise ConfigurationError(f"population {spec.pop_id} has size < 1")
        for pid in spec.lower_partners:
            if pid not in by_id or pid == spec.pop_id:
                raise ConfigurationError(f"population {spec.pop_id} lists unknown partner {pid}")
            partner = by_id[pid]
            if not partner.mask.issubset(spec.mask):
                raise ConfigurationError(
                    f"partner {pid} of population {spec.pop_id} is not a sub-mask")
            if partner.level >= spec.level:
                raise ConfigurationError(
                    f"partner {pid} of population {spec.pop_id} is not at a lower level")
        if spec.level == 0 and spec.lower_partners:
            raise ConfigurationError("bottom-level populations cannot have lower partners")
    total = sum(spec.size for spec in topology)
    if total != config.total_population:
        raise ConfigurationError(
            f"population sizes sum to {total}, expected total_population="
            f"{config.total_population}")


def _complement_tiling(spec: PopulationSpec, topology: list[PopulationSpec],
                       full_length: int) -> Optional[tuple[int, ...]]:
    """Bottom populations whose masks exactly tile the complement of `spec`."""
    want = frozenset(range(full_length)) - spec.mask._set
    if not want:
        return ()
    chosen: list[int] = []
    covered: set[int] = set()
    for other in topology:
        if other.level != 0 or other.pop_id == spec.pop_id:
            continue
        members = other.mask._set
        if members <= want and not (members & covered):
            chosen.append(other.pop_id)
            covered |= members
    if covered == want:
        return tuple(chosen)
    return None


def init_pyramid(problem: ProblemDefinition, topology: list[PopulationSpec],
                 config: PyramidConfig, rng: np.random.Generator) -> PyramidState:
    """Build and evaluate the initial hierarchy.

    Every population is filled with uniform random individuals; the penalty
    weight of each population starts at the mean per-gene magnitude of its
    initial raw objectives (clamped to the configured bounds).
    """
    config.validate()
    _validate_topology(problem, topology, config)
    if np.any(problem.allele_counts <= 0):
        bad = int(np.argmin(problem.allele_counts))
        raise InstanceError(f"gene {bad} has no feasible allele")

    pops: list[SubPopulation] = []
    for spec in topology:
        genes = problem.random_genes(spec.mask, spec.size, rng)
        pops.append(SubPopulation(
            pop_id=spec.pop_id, mask=spec.mask, level=spec.level,
            lower_partners=tuple(spec.lower_partners), size=spec.size,
            eval_key=spec.eval_key, sense=config.sense, genes=genes,
            raw=np.zeros(spec.size), violation=np.zeros(spec.size),
            penalized=np.zeros(spec.size),
            penalty=PenaltyController(
                weight=config.penalty_min, w_min=config.penalty_min,
                w_max=config.penalty_max, growth=config.penalty_growth,
                decay=config.penalty_decay, delta=config.penalty_delta),
            complement_pops=_complement_tiling(spec, topology, problem.full_length),
        ))

    state = PyramidState(problem=problem, config=config, populations=pops)

    # Seed each penalty weight from the mean per-gene raw objective magnitude,
    # then evaluate everything under the population's own sub-fitness. Runs
    # with a partnered evaluation strategy re-evaluate before the first step.
    for pop in pops:
        raw, viol = problem.evaluate_batch(pop.eval_key, pop.mask, pop.genes)
        if config.penalty_init is None:
            pop.penalty.weight = float(np.mean(np.abs(raw))) / max(len(pop.mask), 1)
        else:
            pop.penalty.weight = config.penalty_init
        pop.penalty.clamp()
        pop.raw[:] = raw
        pop.violation[:] = viol
        pop.penalized[:] = penalize(raw, viol, pop.penalty.weight, pop.sense)
        _refresh_best(pop, count_stale=False)
    return state


def reevaluate_all(state: PyramidState, eval_strategy, rng: np.random.Generator) -> None:
    """Evaluate every individual of every population under the active mode."""
    for pop in state.populations:
        slots = np.arange(pop.size)
        raw, viol = _evaluate_offspring(state, pop, pop.genes, slots, eval_strategy, rng)
        pop.raw[:] = raw
        pop.violation[:] = viol
        pop.penalized[:] = penalize(raw, viol, pop.penalty.weight, pop.sense)
        pop.version += 1
        pop.best_ever = None
        _refresh_best(pop, count_stale=False)


def _refresh_best(pop: SubPopulation, count_stale: bool = True) -> bool:
    """Update best_ever from the current population; returns True on improvement."""
    idx = pop.best_index()
    current = float(pop.penalized[idx])
    if pop.best_ever is None or is_better(current, pop.best_ever.penalized, pop.sense):
        pop.best_ever = pop.individual(idx)
        if count_stale:
            pop.stale_generations = 0
        return True
    if count_stale:
        pop.stale_generations += 1
    return False


# ---------------------------------------------------------------------------
# evaluation (direct sub-fitness or partner-assembled full fitness)


def direct_evaluate_batch(state: PyramidState, pop: SubPopulation,
                          genes: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """The population's own (sub-)fitness terms for a gene matrix."""
    return state.problem.evaluate_batch(pop.eval_key, pop.mask, genes)


def _evaluate_offspring(state: PyramidState, pop: SubPopulation, genes: np.ndarray,
                        dest_slots: np.ndarray, eval_strategy,
                        rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Fitness terms for offspring headed for `dest_slots` of `pop`.

    With no evaluation strategy, this is the population's own sub-fitness.
    With one, partial solutions are completed by partners drawn from the
    complement-tiling populations and scored with the full problem fitness
    (delegated to the strategy object).
    """
    if eval_strategy is None or len(pop.mask) == state.problem.full_length:
        if eval_strategy is not None:
            return state.problem.evaluate_full_batch(genes)
        return direct_evaluate_batch(state, pop, genes)
    return eval_strategy.evaluate_batch(state, pop, genes, dest_slots, rng)


# ---------------------------------------------------------------------------
# penalty adaptation


def update_penalty(pop: SubPopulation) -> float:
    """Adapt the population's penalty weight from this generation's members.

    No feasible member: grow the weight. Best-by-raw member feasible: decay
    it. Otherwise set it to the raw-objective gap between the best feasible
    and the best overall member, scaled by the latter's violation.
    """
    ctrl = pop.penalty
    feasible = pop.violation == 0.0
    best_all = argbest(pop.raw, pop.sense)
    ctrl.last_best_raw = float(pop.raw[best_all])
    if not feasible.any():
        ctrl.last_best_feasible_raw = math.nan
        ctrl.weight *= ctrl.growth
    elif feasible[best_all]:
        ctrl.last_best_feasible_raw = ctrl.last_best_raw
        ctrl.weight *= ctrl.decay
    else:
        feas_idx = np.flatnonzero(feasible)
        best_feas = feas_idx[argbest(pop.raw[feas_idx], pop.sense)]
        ctrl.last_best_feasible_raw = float(pop.raw[best_feas])
        gap = abs(ctrl.last_best_feasible_raw - ctrl.last_best_raw)
        ctrl.weight = gap / float(pop.violation[best_all]) + ctrl.delta
    ctrl.clamp()
    return ctrl.weight


# ---------------------------------------------------------------------------
# generation step


def _replace_counts(size: int, fraction: float) -> tuple[int, int]:
    n_replace = int(math.floor(size * fraction + 1e-9))
    n_replace = min(max(n_replace, 1), size - 1)
    return size - n_replace, n_replace


def _build_offspring(state: PyramidState, pop: SubPopulation, n_replace: int,
                     mating_strategy, rng: np.random.Generator
                     ) -> tuple[np.ndarray, np.ndarray]:
    """Produce `n_replace` offspring gene rows for `pop`.

    Returns (genes matrix, slot index of each child's first parent). Each
    production event of a non-bottom population is a 50/50 choice between a
    within-population uniform crossover (two children, both parents by rank
    roulette) and a cross-level crossover (one child, partner population
    picked uniformly at random, partner individual by the mating strategy).
    Bottom populations use only within-population crossover.
    """
    cfg = state.config
    order, cum = state.rank_table(pop)
    length = len(pop.mask)
    partners = pop.lower_partners

    n_cross = 0
    if pop.level > 0 and partners:
        produced = 0
        while produced < n_replace:
            if rng.random() < CROSS_LEVEL_PROB:
                n_cross += 1
                produced += 1
            else:
                produced += 2
    n_within = n_replace - n_cross
    pairs = (n_within + 1) // 2

    a_idx = _roulette_many(order, cum, pairs, rng)
    b_idx = _roulette_many(order, cum, pairs, rng)
    take = rng.random((pairs, length)) < cfg.uniform_p
    first_a, first_b = pop.genes[a_idx], pop.genes[b_idx]
    within = np.empty((2 * pairs, length), dtype=GENE_DTYPE)
    within[0::2] = np.where(take, first_a, first_b)
    within[1::2] = np.where(take, first_b, first_a)
    within_first = np.empty(2 * pairs, dtype=np.int64)
    within_first[0::2] = a_idx
    within_first[1::2] = b_idx

    children = np.empty((n_replace, length), dtype=GENE_DTYPE)
    first_parent = np.empty(n_replace, dtype=np.int64)
    children[:n_within] = within[:n_within]
    first_parent[:n_within] = within_first[:n_within]
    for i in range(n_within, n_replace):
        first = _roulette(order, cum, rng)
        partner_pop = state.populations[partners[int(rng.integers(len(partners)))]]
        children[i] = mating_strategy.pick_and_combine(state, pop, first,
                                                       partner_pop, rng)
        first_parent[i] = first
    return children, first_parent


def _place_offspring(pop: SubPopulation, dest: np.ndarray, children: np.ndarray,
                     raw: np.ndarray, viol: np.ndarray, pen: np.ndarray) -> None:
    pop.genes[dest] = children
    pop.raw[dest] = raw
    pop.violation[dest] = viol
    pop.penalized[dest] = pen
    pop.version += 1


def generation_step(state: PyramidState, mating_strategy, eval_strategy,
                    rng: np.random.Generator) -> PyramidState:
    """One generational cycle over every population, bottom to top.

    Per population: the best ~10% survive unchanged, the rest are replaced by
    mutated offspring, the penalty weight adapts, and staleness counters move.
    """
    for pop in state.populations:
        n_elite, n_replace = _replace_counts(pop.size, state.config.replacement_fraction)
        if n_replace == 0:
            update_penalty(pop)
            _refresh_best(pop)
            continue
        order, _ = state.rank_table(pop)
        dest = order[n_elite:]
        children, first_parent = _build_offspring(state, pop, n_replace,
                                                  mating_strategy, rng)
        children = _mutate_batch(children, pop.mask, state.config.mutation_rate,
                                 state.problem, rng)
        dest = mating_strategy.arrange_destinations(state, pop, dest,
                                                    first_parent, rng)
        raw, viol = _evaluate_offspring(state, pop, children, dest,
                                        eval_strategy, rng)
        pen = penalize(raw, viol, pop.penalty.weight, pop.sense)
        _place_offspring(pop, dest, children, raw, viol, pen)
        update_penalty(pop)
        _refresh_best(pop)
    state.generation += 1
    return state


# ---------------------------------------------------------------------------
# full runs


@dataclass
class RunResult:
    seed: int
    config_digest: str
    generations: int
    feasible: bool
    best_raw: Optional[float]  # raw objective of the best feasible solution
    best_genes: Optional[list[int]]
    best_penalized: float  # best penalized fitness seen at the top level
    trace: list[float]  # top-level best penalized fitness per generation
    stopped_by: str = "stagnation"
    hillclimb_moves: int = 0

    def to_record(self) -> dict:
        return {
            "format": "pyramid-run",
            "version": 1,
            "seed": self.seed,
            "config_digest": self.config_digest,
            "generations": self.generations,
            "feasible": self.feasible,
            "best_raw": self.best_raw,
            "best_genes": self.best_genes,
            "best_penalized": self.best_penalized,
            "stopped_by": self.stopped_by,
            "hillclimb_moves": self.hillclimb_moves,
            "trace": self.trace,
        }


class _BestTracker:
    """Tracks the best feasible full solution seen anywhere in a run."""

    def __init__(self, sense: str):
        self.sense = sense
        self.raw: Optional[float] = None
        self.genes: Optional[np.ndarray] = None

    def offer(self, raw: float, violation: float, genes: np.ndarray) -> bool:
        if violation != 0.0:
            return False
        if self.raw is None or is_better(raw, self.raw, self.sense):
            self.raw = float(raw)
            self.genes = np.asarray(genes, dtype=GENE_DTYPE).copy()
            return True
        return False


def _scan_top_feasible(tracker: _BestTracker, top: SubPopulation) -> None:
    feas = np.flatnonzero(top.violation == 0.0)
    if len(feas):
        best = feas[argbest(top.raw[feas], top.sense)]
        tracker.offer(float(top.raw[best]), 0.0, top.genes[best])


def run(state: PyramidState, mating_strategy, eval_strategy,
        rng: np.random.Generator,
        refine: Optional[Callable[[np.ndarray, float], tuple[np.ndarray, int]]] = None,
        ) -> RunResult:
    """Evolve until the top population stops improving.

    Stops once the top population's best penalized fitness has not improved
    for `stagnation_limit` generations (or a configured generation/wall-clock
    budget runs out first). `refine`, when given, is applied each generation
    to the top population's best solution; improvements it finds are recorded
    in the run result but not written back into the gene pool, so the
    evolutionary trajectory is identical with and without it.
    """
    cfg = state.config
    if eval_strategy is not None:
        reevaluate_all(state, eval_strategy, rng)
    top = state.top
    tracker = _BestTracker(top.sense)
    _scan_top_feasible(tracker, top)
    trace = [float(top.best_ever.penalized)]
    hillclimb_moves = 0
    stopped_by = "stagnation"
    t0 = time.monotonic()

    def refine_best() -> None:
        nonlocal hillclimb_moves
        if refine is None:
            return
        best = top.best_ever
        genes, moves = refine(best.genes, top.penalty.weight)
        hillclimb_moves += moves
        if moves > 0:
            raw, viol = state.problem.evaluate_full_batch(genes[None, :])
            tracker.offer(float(raw[0]), float(viol[0]), genes)

    refine_best()
    while top.stale_generations < cfg.stagnation_limit:
        if cfg.max_generations is not None and state.generation >= cfg.max_generations:
            stopped_by = "generation_budget"
            break
        if cfg.max_seconds is not None and time.monotonic() - t0 > cfg.max_seconds:
            stopped_by = "time_budget"
            break
        generation_step(state, mating_strategy, eval_strategy, rng)
        _scan_top_feasible(tracker, top)
        refine_best()
        trace.append(float(top.best_ever.penalized))

    return RunResult(
        seed=cfg.rng_seed,
        config_digest=cfg.digest(),
        generations=state.generation,
        feasible=tracker.raw is not None,
        best_raw=tracker.raw,
        best_genes=tracker.genes.tolist() if tracker.genes is not None else None,
        best_penalized=float(top.best_ever.penalized),
        trace=trace,
        stopped_by=stopped_by,
        hillclimb_moves=hillclimb_moves,
    )
