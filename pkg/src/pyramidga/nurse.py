"""Weekly nurse rostering: assign each nurse one shift pattern from her
contract-feasible set so that graded demand is covered on every day and night.

A solution is a length-n integer string, one pattern index per nurse, so the
one-pattern-per-nurse constraint holds by encoding. Cover works downward:
a nurse of grade g counts towards demand at grade g and every lower grade.
Demand is therefore stored cumulatively: demand[k][s] is the number of nurses
of grade <= s+1 required on slot k (slots 0..6 are days, 7..13 nights).

Uncovered demand is penalised linearly; the aggregate sub-fitness used by
lower pyramid levels drops the grade substitution structure and compares
block supply against block demand only.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from itertools import combinations
from pathlib import Path
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .engine import (
    GENE_DTYPE,
    ConfigurationError,
    GeneMask,
    InstanceError,
    PopulationSpec,
    ProblemDefinition,
    PyramidConfig,
)

NUM_SLOTS = 14
DAY_SLOTS = slice(0, 7)
NIGHT_SLOTS = slice(7, 14)

# the seven aggregate pyramid levels; the eighth (top) uses the full fitness
AGGREGATE_LEVELS = ((1,), (2,), (3,), (1, 2), (2, 3), (1, 3), (1, 2, 3))


@dataclass
class NurseInstance:
    """All data of one ward-week: pattern universe, contracts, costs, demand."""

    num_nurses: int
    pattern_cover: np.ndarray  # (m, 14) 0/1, slot coverage per pattern
    grade_of: np.ndarray  # (n,) grades 1..3, 1 is the highest qualification
    pref_cost: np.ndarray  # (n, m) penalty cost of nurse i working pattern j
    day_shifts: np.ndarray  # (n,) shifts per week on a day contract
    night_shifts: np.ndarray  # (n,) shifts per week on a night contract
    both_shifts: np.ndarray  # (n,) shifts on a mixed contract, 0 = none
    demand: np.ndarray  # (14, 3) cumulative: required nurses of grade <= s+1
    instance_id: str = "nurse"
    num_grades: int = 3

    def __post_init__(self):
        self.pattern_cover = np.asarray(self.pattern_cover, dtype=np.int8)
        self.grade_of = np.asarray(self.grade_of, dtype=np.int8)
        self.pref_cost = np.asarray(self.pref_cost, dtype=np.int32)
        self.day_shifts = np.asarray(self.day_shifts, dtype=np.int8)
        self.night_shifts = np.asarray(self.night_shifts, dtype=np.int8)
        self.both_shifts = np.asarray(self.both_shifts, dtype=np.int8)
        self.demand = np.asarray(self.demand, dtype=np.int64)
        self._validate()
        day_total = self.pattern_cover[:, DAY_SLOTS].sum(axis=1)
        night_total = self.pattern_cover[:, NIGHT_SLOTS].sum(axis=1)
        self._is_day = night_total == 0
        self._is_night = day_total == 0
        self._is_mixed = ~(self._is_day | self._is_night)
        self._day_total = day_total
        self._night_total = night_total
        self.feasible = [feasible_patterns(self, i) for i in range(self.num_nurses)]
        for i, fset in enumerate(self.feasible):
            if len(fset) == 0:
                raise InstanceError(f"nurse {i} has no feasible shift pattern")
        # demand per single grade, derived from the cumulative matrix
        per_grade = self.demand.astype(np.int64).copy()
        per_grade[:, 1:] -= self.demand[:, :-1]
        self.per_grade_demand = per_grade
        self.nurses_of_grade = {
            g: np.flatnonzero(self.grade_of == g) for g in (1, 2, 3)}

    def _validate(self):
        n = self.num_nurses
        if self.grade_of.shape != (n,) or self.pref_cost.shape[0] != n:
            raise InstanceError("nurse array shapes do not match num_nurses")
        if self.pattern_cover.shape[1] != NUM_SLOTS:
            raise InstanceError("patterns must cover 14 day/night slots")
        if self.pattern_cover.sum(axis=1).min() == 0:
            raise InstanceError("empty shift pattern in the universe")
        if not np.all((self.grade_of >= 1) & (self.grade_of <= self.num_grades)):
            raise InstanceError("grades must lie in 1..3")
        if self.demand.shape != (NUM_SLOTS, self.num_grades):
            raise InstanceError("demand must be a 14 x 3 matrix")
        if np.any(np.diff(self.demand, axis=1) < 0):
            raise InstanceError("cumulative demand must be non-decreasing in grade")
        if np.any(self.demand < 0):
            raise InstanceError("demand must be non-negative")

    @property
    def num_patterns(self) -> int:
        return len(self.pattern_cover)

    def grade_members(self, grades: Sequence[int]) -> np.ndarray:
        """Nurse indices whose grade lies in `grades`, in global order."""
        return np.flatnonzero(np.isin(self.grade_of, list(grades)))


def feasible_patterns(instance: NurseInstance, nurse: int) -> np.ndarray:
    """Pattern indices the nurse's contract allows.

    Day patterns must match the day-shift count, night patterns the
    night-shift count; mixed day/night patterns are only allowed for nurses
    with a mixed contract and must match its total.
    """
    cover = instance.pattern_cover
    day_total = cover[:, DAY_SLOTS].sum(axis=1)
    night_total = cover[:, NIGHT_SLOTS].sum(axis=1)
    is_day = night_total == 0
    is_night = day_total == 0
    ok = (is_day & (day_total == instance.day_shifts[nurse])) | \
         (is_night & (night_total == instance.night_shifts[nurse]))
    if instance.both_shifts[nurse] > 0:
        mixed = ~(is_day | is_night)
        ok |= mixed & ((day_total + night_total) == instance.both_shifts[nurse])
    return np.flatnonzero(ok).astype(GENE_DTYPE)


def cover(instance: NurseInstance, solution: Sequence[int], slot: int,
          grade: int) -> int:
    """Number of nurses of grade <= `grade` whose pattern covers `slot`."""
    sol = np.asarray(solution)
    eligible = instance.grade_of <= grade
    return int(instance.pattern_cover[sol[eligible], slot].sum())


def full_fitness_batch(instance: NurseInstance,
                       genes: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(raw cost, uncovered demand) for each row of a (batch, n) matrix."""
    genes = np.asarray(genes)
    n = instance.num_nurses
    raw = instance.pref_cost[np.arange(n)[None, :], genes].sum(axis=1)
    cum = np.zeros((len(genes), NUM_SLOTS), dtype=np.int64)
    viol = np.zeros(len(genes), dtype=np.int64)
    for s, g in enumerate((1, 2, 3)):
        members = instance.nurses_of_grade[g]
        if len(members):
            cum += instance.pattern_cover[genes[:, members]].sum(axis=1)
        viol += np.maximum(instance.demand[:, s][None, :] - cum, 0).sum(axis=1)
    return raw.astype(np.float64), viol.astype(np.float64)


def full_fitness(instance: NurseInstance, solution: Sequence[int],
                 weight: float) -> tuple[float, float, float]:
    """Preference cost, total uncovered demand, and their weighted sum."""
    raw, viol = full_fitness_batch(instance, np.asarray(solution)[None, :])
    return float(raw[0]), float(viol[0]), float(raw[0] + weight * viol[0])


def sub_fitness_batch(instance: NurseInstance, grades: tuple[int, ...],
                      members: np.ndarray,
                      genes: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Aggregate-level terms for partial solutions over the given grade block.

    Supply is the plain head count covering each slot; demand is the block's
    summed per-grade demand. The substitution structure between grades is
    ignored at this level.
    """
    raw = instance.pref_cost[members[None, :], genes].sum(axis=1)
    supply = instance.pattern_cover[genes].sum(axis=1)
    cols = [g - 1 for g in grades]
    block_demand = instance.per_grade_demand[:, cols].sum(axis=1)
    viol = np.maximum(block_demand[None, :] - supply, 0).sum(axis=1)
    return raw.astype(np.float64), viol.astype(np.float64)


def sub_fitness(instance: NurseInstance, partial: Sequence[int],
                grades: Sequence[int], weight: float) -> tuple[float, float, float]:
    """Sub-fitness of a partial solution covering exactly the nurses whose
    grade lies in `grades` (in global nurse order)."""
    key = tuple(sorted(grades))
    if key not in AGGREGATE_LEVELS:
        raise ConfigurationError(f"grade set {key} is not a pyramid level")
    members = instance.grade_members(key)
    genes = np.asarray(partial)[None, :]
    if genes.shape[1] != len(members):
        raise ValueError("partial solution length does not match the grade block")
    raw, viol = sub_fitness_batch(instance, key, members, genes)
    return float(raw[0]), float(viol[0]), float(raw[0] + weight * viol[0])


def is_balanced(instance: NurseInstance, solution: Sequence[int]) -> bool:
    """True when aggregate surplus covers aggregate shortage, separately
    within the day block and the night block."""
    sol = np.asarray(solution)
    supply = instance.pattern_cover[sol].sum(axis=0)
    total_demand = instance.demand[:, -1]
    for block in (DAY_SLOTS, NIGHT_SLOTS):
        diff = supply[block] - total_demand[block]
        surplus = diff[diff > 0].sum()
        shortage = -diff[diff < 0].sum()
        if surplus < shortage:
            return False
    return True


# ---------------------------------------------------------------------------
# hillclimber


class HillclimbResult(NamedTuple):
    solution: np.ndarray
    moves: int
    evaluations: int


class _ClimbContext:
    """Incrementally maintained fitness state for the hillclimber."""

    def __init__(self, instance: NurseInstance, genes: np.ndarray, weight: float):
        self.inst = instance
        self.genes = genes
        self.weight = weight
        # grade_cols[i] = bool row over the three cumulative columns
        self.grade_cols = np.stack(
            [instance.grade_of <= g for g in (1, 2, 3)], axis=1).astype(np.int64)
        cover3 = np.zeros((NUM_SLOTS, 3), dtype=np.int64)
        for i in range(instance.num_nurses):
            cover3 += np.outer(instance.pattern_cover[genes[i]], self.grade_cols[i])
        self.cover3 = cover3
        self.raw = int(instance.pref_cost[np.arange(instance.num_nurses), genes].sum())
        self.viol = int(np.maximum(instance.demand - cover3, 0).sum())

    @property
    def penalized(self) -> float:
        return self.raw + self.weight * self.viol

    def violation_with(self, cover3: np.ndarray) -> int:
        return int(np.maximum(self.inst.demand - cover3, 0).sum())

    def reassign(self, nurse: int, pattern: int) -> None:
        old = self.genes[nurse]
        delta = self.inst.pattern_cover[pattern].astype(np.int64) - \
            self.inst.pattern_cover[old]
        self.cover3 += np.outer(delta, self.grade_cols[nurse])
        self.raw += int(self.inst.pref_cost[nurse, pattern] -
                        self.inst.pref_cost[nurse, old])
        self.genes[nurse] = pattern
        self.viol = self.violation_with(self.cover3)


def _scan_reassign(ctx: _ClimbContext, budget: int) -> tuple[Optional[tuple], int]:
    """First single-nurse reassignment that strictly improves, if any."""
    inst = ctx.inst
    used = 0
    for i in range(inst.num_nurses):
        cand = inst.feasible[i]
        if used + len(cand) > budget:
            cand = cand[:max(budget - used, 0)]
        if len(cand) == 0:
            if used >= budget:
                return None, used
            continue
        old = ctx.genes[i]
        base = ctx.cover3 - np.outer(inst.pattern_cover[old], ctx.grade_cols[i])
        add = inst.pattern_cover[cand][:, :, None] * ctx.grade_cols[i][None, None, :]
        viol = np.maximum(inst.demand[None] - (base[None] + add), 0).sum(axis=(1, 2))
        raw = ctx.raw - inst.pref_cost[i, old] + inst.pref_cost[i, cand]
        pen = raw + ctx.weight * viol
        used += len(cand)
        better = np.flatnonzero(pen < ctx.penalized - 1e-9)
        if len(better):
            return ("reassign", i, int(cand[better[0]])), used
        if used >= budget:
            return None, used
    return None, used


def _scan_swap(ctx: _ClimbContext, budget: int) -> tuple[Optional[tuple], int]:
    """First strictly improving two-nurse pattern swap (both stay feasible)."""
    inst = ctx.inst
    used = 0
    feas_member = np.zeros((inst.num_nurses, inst.num_patterns), dtype=bool)
    for i, f in enumerate(inst.feasible):
        feas_member[i, f] = True
    for i in range(inst.num_nurses - 1):
        pi = ctx.genes[i]
        for j in range(i + 1, inst.num_nurses):
            pj = ctx.genes[j]
            if pi == pj or not (feas_member[i, pj] and feas_member[j, pi]):
                continue
            if used >= budget:
                return None, used
            used += 1
            delta_raw = (inst.pref_cost[i, pj] + inst.pref_cost[j, pi]
                         - inst.pref_cost[i, pi] - inst.pref_cost[j, pj])
            gdiff = ctx.grade_cols[i] - ctx.grade_cols[j]
            if np.any(gdiff):
                pdiff = inst.pattern_cover[pj].astype(np.int64) - inst.pattern_cover[pi]
                new_cover = ctx.cover3 + np.outer(pdiff, gdiff)
                new_viol = ctx.violation_with(new_cover)
            else:
                new_viol = ctx.viol
            if ctx.raw + delta_raw + ctx.weight * new_viol < ctx.penalized - 1e-9:
                return ("swap", i, j), used
    return None, used


def _scan_chain(ctx: _ClimbContext, budget: int) -> tuple[Optional[tuple], int]:
    """First improving chain: nurse a takes b's pattern, b moves to a fresh
    feasible pattern; then the length-3 variant a<-b<-c with c refreshed."""
    inst = ctx.inst
    used = 0
    n = inst.num_nurses
    feas_sets = [set(f.tolist()) for f in inst.feasible]
    for length in (2, 3):
        for a in range(n):
            for b in range(n):
                if b == a or ctx.genes[b] not in feas_sets[a]:
                    continue
                if length == 2:
                    chain = [(a, b)]
                    found, add_used = _try_chain_tail(ctx, chain, b, budget - used)
                    used += add_used
                    if found is not None:
                        return found, used
                    if used >= budget:
                        return None, used
                else:
                    for c in range(n):
                        if c in (a, b) or ctx.genes[c] not in feas_sets[b]:
                            continue
                        chain = [(a, b), (b, c)]
                        found, add_used = _try_chain_tail(ctx, chain, c, budget - used)
                        used += add_used
                        if found is not None:
                            return found, used
                        if used >= budget:
                            return None, used
    return None, used


def _try_chain_tail(ctx: _ClimbContext, links: list, tail: int,
                    budget: int) -> tuple[Optional[tuple], int]:
    """Evaluate chain moves where each (a, b) link hands b's pattern to a and
    the tail nurse takes each of her feasible patterns in turn."""
    if budget <= 0:
        return None, 0
    inst = ctx.inst
    base = ctx.cover3.astype(np.int64).copy()
    raw = ctx.raw
    for a, b in links:
        pa, pb = ctx.genes[a], ctx.genes[b]
        delta = inst.pattern_cover[pb].astype(np.int64) - inst.pattern_cover[pa]
        base += np.outer(delta, ctx.grade_cols[a])
        raw += int(inst.pref_cost[a, pb] - inst.pref_cost[a, pa])
    # remove the tail nurse's current pattern
    pt = ctx.genes[tail]
    base -= np.outer(inst.pattern_cover[pt].astype(np.int64), ctx.grade_cols[tail])
    raw -= int(inst.pref_cost[tail, pt])
    cand = inst.feasible[tail][:budget]
    add = inst.pattern_cover[cand][:, :, None] * ctx.grade_cols[tail][None, None, :]
    viol = np.maximum(inst.demand[None] - (base[None] + add), 0).sum(axis=(1, 2))
    pen = raw + inst.pref_cost[tail, cand] + ctx.weight * viol
    better = np.flatnonzero(pen < ctx.penalized - 1e-9)
    if len(better):
        return ("chain", tuple(links), tail, int(cand[better[0]])), len(cand)
    return None, len(cand)


def hillclimb(instance: NurseInstance, solution: Sequence[int], weight: float,
              move_budget: int = 10_000) -> HillclimbResult:
    """First-improvement local search: single reassignments, then pattern
    swaps, then short chain moves, restarting from the cheapest move type
    after every applied move. Never returns a worse solution than the input.
    """
    ctx = _ClimbContext(instance, np.asarray(solution, dtype=GENE_DTYPE).copy(),
                        float(weight))
    moves = 0
    evals = 0
    while evals < move_budget:
        move, used = _scan_reassign(ctx, move_budget - evals)
        evals += used
        if move is None and evals < move_budget:
            move, used = _scan_swap(ctx, move_budget - evals)
            evals += used
        if move is None and evals < move_budget:
            move, used = _scan_chain(ctx, move_budget - evals)
            evals += used
        if move is None:
            break
        moves += 1
        if move[0] == "reassign":
            ctx.reassign(move[1], move[2])
        elif move[0] == "swap":
            _, i, j = move
            pi, pj = int(ctx.genes[i]), int(ctx.genes[j])
            ctx.reassign(i, pj)
            ctx.reassign(j, pi)
        else:
            _, links, tail, fresh = move
            new_patterns = {a: int(ctx.genes[b]) for a, b in links}
            new_patterns[tail] = fresh
            for nurse, pattern in new_patterns.items():
                ctx.reassign(nurse, pattern)
    return HillclimbResult(ctx.genes, moves, evals)


# ---------------------------------------------------------------------------
# synthetic instance generation


@dataclass
class NurseGenParams:
    """Knobs of the synthetic ward generator.

    `demand_tightness` scales demand against the expected supply of a random
    roster: 0 means no demand at all, values towards 1 approach the expected
    coverage and squeeze the feasible region.

    `night_cost_floor` models the ward reality that days are preferred:
    night-pattern costs are drawn from the same skewed distribution but lifted
    to at least 100x this fraction, so cheap partial solutions lean towards
    days while cover needs nights filled.
    """

    num_nurses: int = 30
    grade_mix: tuple[float, float, float] = (0.2, 0.3, 0.5)
    day_counts: tuple[int, ...] = (4, 5)
    night_counts: tuple[int, ...] = (3, 4)
    both_fraction: float = 0.1
    demand_tightness: float = 0.9
    zero_cost_patterns: tuple[int, int] = (2, 4)  # per-nurse requests ("wishes")
    night_cost_floor: float = 0.35
    night_wish_fraction: float = 0.4  # nurses whose requests are night patterns


def _pattern_universe(day_counts, night_counts) -> np.ndarray:
    rows = []
    for d in sorted(set(day_counts)):
        for combo in combinations(range(7), d):
            row = np.zeros(NUM_SLOTS, dtype=np.int8)
            row[list(combo)] = 1
            rows.append(row)
    for nn in sorted(set(night_counts)):
        for combo in combinations(range(7, 14), nn):
            row = np.zeros(NUM_SLOTS, dtype=np.int8)
            row[list(combo)] = 1
            rows.append(row)
    return np.array(rows, dtype=np.int8)


def generate_instance(params: NurseGenParams, seed: int) -> NurseInstance:
    """Deterministic synthetic ward. Demand is the floor of `demand_tightness`
    times the expected cumulative supply of uniform random rosters."""
    if params.num_nurses < 3:
        raise InstanceError("need at least one nurse per grade")
    if not (0 <= params.demand_tightness <= 1):
        raise InstanceError("demand_tightness must lie in [0, 1]")
    if not params.day_counts and not params.night_counts:
        raise InstanceError("at least one day or night regime is required")
    rng = np.random.default_rng(seed)
    n = params.num_nurses
    patterns = _pattern_universe(params.day_counts, params.night_counts)

    mix = np.asarray(params.grade_mix, dtype=float)
    counts = np.floor(mix / mix.sum() * n).astype(int)
    counts[counts == 0] = 1
    while counts.sum() > n:
        counts[int(np.argmax(counts))] -= 1
    counts[2] += n - counts.sum()
    grade_of = np.repeat([1, 2, 3], counts)

    day_shifts = (rng.choice(params.day_counts, size=n) if params.day_counts
                  else np.zeros(n, dtype=np.int8))
    night_shifts = (rng.choice(params.night_counts, size=n) if params.night_counts
                    else np.zeros(n, dtype=np.int8))
    both_shifts = np.where(rng.random(n) < params.both_fraction,
                           np.maximum(day_shifts, night_shifts), 0)

    m = len(patterns)
    base = rng.random((n, m)) ** 2
    floor = params.night_cost_floor
    covers_nights = (patterns[:, NIGHT_SLOTS].sum(axis=1) > 0)[None, :]
    scaled = np.where(covers_nights, floor + (1.0 - floor) * base, base)
    pref = np.floor(100 * scaled).astype(np.int32)

    inst = NurseInstance(
        num_nurses=n, pattern_cover=patterns, grade_of=grade_of,
        pref_cost=pref, day_shifts=day_shifts, night_shifts=night_shifts,
        both_shifts=both_shifts, demand=np.zeros((NUM_SLOTS, 3), dtype=np.int64),
        instance_id=f"nurse-n{n}-s{seed}",
    )

    # grant each nurse a few zero-cost wished-for patterns; most nurses wish
    # for days, a minority is happy to work nights, so cheap rosters exist
    # but only when the right nurses take the night slots
    day_only = np.flatnonzero(~covers_nights[0])
    night_only = np.flatnonzero(covers_nights[0])
    lo, hi = params.zero_cost_patterns
    for i in range(n):
        wish = rng.integers(lo, hi + 1)
        prefers_nights = rng.random() < params.night_wish_fraction
        pool = inst.feasible[i]
        wanted = pool[np.isin(pool, night_only if prefers_nights else day_only)]
        if len(wanted):
            pool = wanted
        chosen = rng.choice(pool, size=min(wish, len(pool)), replace=False)
        pref[i, chosen] = 0

    # expected cumulative supply of a uniform random roster, per slot and grade
    mean_cover = np.stack([patterns[f].mean(axis=0) for f in inst.feasible])
    expected = np.zeros((NUM_SLOTS, 3))
    for s, g in enumerate((1, 2, 3)):
        expected[:, s] = mean_cover[grade_of <= g].sum(axis=0)
    demand = np.floor(params.demand_tightness * expected).astype(np.int64)
    demand = np.maximum.accumulate(demand, axis=1)  # keep cumulative monotone

    return NurseInstance(
        num_nurses=n, pattern_cover=patterns, grade_of=grade_of,
        pref_cost=pref, day_shifts=day_shifts, night_shifts=night_shifts,
        both_shifts=both_shifts, demand=demand,
        instance_id=f"nurse-n{n}-s{seed}",
    )


# ---------------------------------------------------------------------------
# engine adapter and topologies


class NurseProblem(ProblemDefinition):
    """Engine-facing view of a nurse instance."""

    sense = "min"

    def __init__(self, instance: NurseInstance):
        self.instance = instance
        self.full_length = instance.num_nurses
        self.instance_id = instance.instance_id
        counts = np.array([len(f) for f in instance.feasible], dtype=np.int64)
        table = np.zeros((instance.num_nurses, int(counts.max())), dtype=GENE_DTYPE)
        for i, f in enumerate(instance.feasible):
            table[i, :len(f)] = f
        self.allele_counts = counts
        self.allele_table = table
        self._members = {key: instance.grade_members(key) for key in AGGREGATE_LEVELS}

    def evaluate_batch(self, eval_key, mask: GeneMask, genes: np.ndarray):
        if eval_key == "full":
            return full_fitness_batch(self.instance, genes)
        return sub_fitness_batch(self.instance, eval_key,
                                 self._members[eval_key], genes)

    def default_topology(self, config: PyramidConfig) -> list[PopulationSpec]:
        return pyramid_topology(self, config)


def pyramid_topology(problem: NurseProblem, config: PyramidConfig
                     ) -> list[PopulationSpec]:
    """Eight populations: one per grade, one per grade pair, the aggregate of
    all grades, and the top population on the full graded fitness."""
    inst = problem.instance
    sub = config.sub_population_size
    top = config.top_population_size
    if top is None:
        top = config.total_population - 7 * sub
    masks = [GeneMask(inst.grade_members(key)) for key in AGGREGATE_LEVELS]
    full = GeneMask.full(inst.num_nurses)
    specs = [
        PopulationSpec(0, masks[0], 0, (), sub, (1,)),
        PopulationSpec(1, masks[1], 0, (), sub, (2,)),
        PopulationSpec(2, masks[2], 0, (), sub, (3,)),
        PopulationSpec(3, masks[3], 1, (0, 1), sub, (1, 2)),
        PopulationSpec(4, masks[4], 1, (1, 2), sub, (2, 3)),
        PopulationSpec(5, masks[5], 1, (0, 2), sub, (1, 3)),
        PopulationSpec(6, masks[6], 2, (0, 1, 2, 3, 4, 5), sub, (1, 2, 3)),
        PopulationSpec(7, full, 3, (0, 1, 2, 3, 4, 5, 6), top, "full"),
    ]
    return specs


def single_topology(problem: ProblemDefinition, config: PyramidConfig
                    ) -> list[PopulationSpec]:
    """A single full-string population: the plain generational GA."""
    return [PopulationSpec(0, GeneMask.full(problem.full_length), 0, (),
                           config.total_population, "full")]


# ---------------------------------------------------------------------------
# instance files


def instance_to_dict(instance: NurseInstance) -> dict:
    return {
        "format": "nurse-instance",
        "version": 1,
        "instance_id": instance.instance_id,
        "num_nurses": instance.num_nurses,
        "num_grades": instance.num_grades,
        "patterns": ["".join(str(b) for b in row) for row in instance.pattern_cover],
        "grades": instance.grade_of.tolist(),
        "preference_costs": instance.pref_cost.tolist(),
        "day_shifts": instance.day_shifts.tolist(),
        "night_shifts": instance.night_shifts.tolist(),
        "both_shifts": instance.both_shifts.tolist(),
        "demand": instance.demand.tolist(),
    }


def instance_from_dict(data: dict) -> NurseInstance:
    if data.get("format") != "nurse-instance" or data.get("version") != 1:
        raise InstanceError("not a version-1 nurse instance file")
    patterns = np.array([[int(c) for c in row] for row in data["patterns"]],
                        dtype=np.int8)
    return NurseInstance(
        num_nurses=data["num_nurses"],
        pattern_cover=patterns,
        grade_of=np.array(data["grades"]),
        pref_cost=np.array(data["preference_costs"]),
        day_shifts=np.array(data["day_shifts"]),
        night_shifts=np.array(data["night_shifts"]),
        both_shifts=np.array(data["both_shifts"]),
        demand=np.array(data["demand"]),
        instance_id=data["instance_id"],
        num_grades=data["num_grades"],
    )


def save_instance(instance: NurseInstance, path) -> None:
    Path(path).write_text(json.dumps(instance_to_dict(instance), indent=1))


def load_instance(path) -> NurseInstance:
    return instance_from_dict(json.loads(Path(path).read_text()))
