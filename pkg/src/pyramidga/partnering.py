"""Partner selection for recombination across sub-population levels, and
partner-assembled fitness evaluation of partial solutions.

Mating strategies (CLI tokens in parentheses): rank roulette (S), uniform
random (R), current best (B), co-located on a shared toroidal grid (D),
joined full-string populations (J), acceptance proportional to the combined
fitness (A), and best-of-k candidate choice (C).

Evaluation strategies: a partial solution is completed to a full string with
partner genes from the bottom populations tiling its complement, then scored
with the full problem fitness. Single pickers S/R/B/D, and double schemes
SR (best + random), BR (rank + random), RR (random + random) that keep the
better of two assemblies.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .engine import (
    GENE_DTYPE,
    ConfigurationError,
    GeneMask,
    Individual,
    PopulationSpec,
    PyramidConfig,
    PyramidState,
    SubPopulation,
    _cut_point_genes,
    _roulette,
    _roulette_many,
    _uniform_pair,
    argbest,
    direct_evaluate_batch,
    is_better,
    penalize,
)

MATING_TOKENS = ("S", "R", "B", "D", "J", "A", "C")
EVAL_TOKENS = ("S", "R", "B", "D", "SR", "BR", "RR")


# ---------------------------------------------------------------------------
# toroidal grid for the distributed scheme


class ToroidalGrid:
    """Fixed rows x cols torus; slot i of every population sits on cell
    i mod (rows*cols), so co-located slots are shared across populations."""

    def __init__(self, rows: int, cols: int):
        if rows < 3 or cols < 3:
            raise ConfigurationError("toroidal grid needs at least 3x3 cells")
        self.rows = rows
        self.cols = cols
        self.n_cells = rows * cols

    @staticmethod
    def for_population_size(size: int) -> "ToroidalGrid":
        """Most square rows x cols factorisation with both sides >= 3."""
        best = None
        for r in range(3, int(size ** 0.5) + 1):
            if size % r == 0 and size // r >= 3:
                best = (r, size // r)
        if best is None:
            raise ConfigurationError(
                f"population size {size} does not factor into a >=3x>=3 grid")
        return ToroidalGrid(*best)

    def cell_of_slot(self, slot: int) -> tuple[int, int]:
        return divmod(slot % self.n_cells, self.cols)

    def cell_index(self, cell: tuple[int, int]) -> int:
        return cell[0] * self.cols + cell[1]

    def occupant_of(self, slot: int, pop_size: int,
                    rng: np.random.Generator) -> int:
        """A slot of a population of `pop_size` sharing this slot's cell."""
        base = slot % self.n_cells
        count = (pop_size - base + self.n_cells - 1) // self.n_cells
        if count <= 0:
            return int(rng.integers(pop_size))
        return base + int(rng.integers(count)) * self.n_cells


def grid_neighbors(grid: ToroidalGrid, cell: tuple[int, int]) -> list[tuple[int, int]]:
    """The eight cells of the Moore neighborhood, wrapping toroidally."""
    if grid.rows < 3 or grid.cols < 3:
        raise ConfigurationError("toroidal grid needs at least 3x3 cells")
    r, c = cell
    out = []
    for dr in (-1, 0, 1):
        for dc in (-1, 0, 1):
            if dr == 0 and dc == 0:
                continue
            out.append(((r + dr) % grid.rows, (c + dc) % grid.cols))
    return out


def _ensure_grid(state: PyramidState) -> ToroidalGrid:
    if state.grid is None:
        state.grid = ToroidalGrid.for_population_size(state.config.sub_population_size)
    return state.grid


# ---------------------------------------------------------------------------
# mating strategies


def acceptance_probability(f_comb: float, f_best: float, sense: str) -> float:
    """Probability of accepting a pairing with combined fitness `f_comb`.

    Pairings at least as good as the best known fitness are always accepted;
    otherwise the ratio of the two (oriented by sense) is used, capped at 1.
    Non-positive fitnesses defeat the ratio scaling and score 0.
    """
    if not is_better(f_best, f_comb, sense):
        return 1.0
    num, den = (f_best, f_comb) if sense == "min" else (f_comb, f_best)
    if den <= 0 or num < 0:
        return 0.0
    return min(num / den, 1.0)


@dataclass
class MatingStrategy:
    """Chooses the partner individual for cross-level recombination."""

    kind: str
    choice_candidates: int = 10
    attract_retries: int = 20
    grid: Optional[ToroidalGrid] = None

    def __post_init__(self):
        if self.kind not in MATING_TOKENS:
            raise ConfigurationError(
                f"unknown mating strategy {self.kind!r}; valid: {', '.join(MATING_TOKENS)}")
        if self.choice_candidates < 1:
            raise ConfigurationError("choice_candidates must be >= 1")

    # -- engine hooks --------------------------------------------------------

    def pick_and_combine(self, state: PyramidState, pop: SubPopulation,
                         first_idx: int, partner_pop: SubPopulation,
                         rng: np.random.Generator) -> np.ndarray:
        """Select a partner from `partner_pop` and return the child's genes."""
        return self._choose(state, pop, first_idx, partner_pop, rng)[1]

    def arrange_destinations(self, state: PyramidState, pop: SubPopulation,
                             dest: np.ndarray, first_parent: np.ndarray,
                             rng: np.random.Generator) -> np.ndarray:
        """Nothing to arrange except for the distributed scheme, where each
        child targets a replacement slot adjacent to its first parent."""
        if self.kind != "D" or len(dest) == 0:
            return dest
        grid = self.grid or _ensure_grid(state)
        by_cell: dict[int, list[int]] = {}
        for slot in dest.tolist():
            by_cell.setdefault(slot % grid.n_cells, []).append(slot)
        assigned = np.empty(len(dest), dtype=dest.dtype)
        pending: list[int] = []
        for i, parent_slot in enumerate(first_parent.tolist()):
            neighbors = grid_neighbors(grid, grid.cell_of_slot(parent_slot))
            target = grid.cell_index(neighbors[int(rng.integers(8))])
            bucket = by_cell.get(target)
            if bucket:
                assigned[i] = bucket.pop(0)
            else:
                assigned[i] = -1
                pending.append(i)
        leftovers = [s for cell in sorted(by_cell) for s in by_cell[cell]]
        for i, slot in zip(pending, leftovers):
            assigned[i] = slot
        return assigned

    # -- internals -----------------------------------------------------------

    def _combine(self, state: PyramidState, pop: SubPopulation,
                 first_idx: int, partner_pop: SubPopulation, partner_idx: int,
                 rng: np.random.Generator) -> np.ndarray:
        upper = pop.genes[first_idx]
        lower = partner_pop.genes[partner_idx]
        if self.kind == "J":
            return _uniform_pair(upper, lower, state.config.uniform_p, rng)[0]
        if partner_pop.mask == pop.mask:
            cut = int(rng.integers(0, len(pop.mask) + 1))
            return _cut_point_genes(lower, upper, cut)
        child = upper.copy()
        child[partner_pop.mask.positions_in(pop.mask)] = lower
        return child

    def _combine_batch(self, state: PyramidState, pop: SubPopulation,
                       first_idx: int, partner_pop: SubPopulation,
                       partner_idx: np.ndarray,
                       rng: np.random.Generator) -> np.ndarray:
        """Children of the first parent with each candidate partner at once."""
        upper = pop.genes[first_idx]
        lowers = partner_pop.genes[partner_idx]
        count, length = len(partner_idx), len(pop.mask)
        if self.kind == "J":
            take = rng.random((count, length)) < state.config.uniform_p
            return np.where(take, upper[None, :], lowers).astype(GENE_DTYPE)
        if partner_pop.mask == pop.mask:
            cuts = rng.integers(0, length + 1, size=count)
            from_lower = np.arange(length)[None, :] < cuts[:, None]
            return np.where(from_lower, lowers, upper[None, :]).astype(GENE_DTYPE)
        children = np.tile(upper, (count, 1))
        children[:, partner_pop.mask.positions_in(pop.mask)] = lowers
        return children

    def _assess(self, state: PyramidState, pop: SubPopulation,
                children: np.ndarray) -> np.ndarray:
        raw, viol = direct_evaluate_batch(state, pop, children)
        return penalize(raw, viol, pop.penalty.weight, pop.sense)

    def _choose(self, state: PyramidState, pop: SubPopulation, first_idx: int,
                partner_pop: SubPopulation, rng: np.random.Generator
                ) -> tuple[int, np.ndarray]:
        kind = self.kind
        if kind in ("S", "J"):
            order, cum = state.rank_table(partner_pop)
            idx = _roulette(order, cum, rng)
        elif kind == "R":
            idx = int(rng.integers(partner_pop.size))
        elif kind == "B":
            idx = argbest(partner_pop.penalized, partner_pop.sense)
        elif kind == "D":
            grid = self.grid or _ensure_grid(state)
            idx = grid.occupant_of(first_idx, partner_pop.size, rng)
        elif kind == "A":
            return self._choose_attractive(state, pop, first_idx, partner_pop, rng)
        elif kind == "C":
            return self._choose_best_child(state, pop, first_idx, partner_pop, rng)
        else:  # pragma: no cover
            raise AssertionError(kind)
        return idx, self._combine(state, pop, first_idx, partner_pop, idx, rng)

    def _choose_attractive(self, state, pop, first_idx, partner_pop, rng):
        """Rank-roulette candidates accepted with probability tied to the
        combined child's fitness; candidate draws are independent, so the
        whole retry budget is drawn and assessed as one batch and the first
        accepted candidate wins (the last is accepted unconditionally)."""
        order, cum = state.rank_table(partner_pop)
        f_best = pop.best_ever.penalized
        k = self.attract_retries + 1
        cand = _roulette_many(order, cum, k, rng)
        children = self._combine_batch(state, pop, first_idx, partner_pop, cand, rng)
        fitness = self._assess(state, pop, children)
        accept = rng.random(k)
        for i in range(k - 1):
            p = acceptance_probability(float(fitness[i]), f_best, pop.sense)
            if accept[i] < p:
                return int(cand[i]), children[i]
        return int(cand[k - 1]), children[k - 1]

    def _choose_best_child(self, state, pop, first_idx, partner_pop, rng):
        k = self.choice_candidates
        cand = rng.integers(0, partner_pop.size, size=k)
        children = self._combine_batch(state, pop, first_idx, partner_pop, cand, rng)
        fitness = self._assess(state, pop, children)
        best = argbest(fitness, pop.sense)
        return int(cand[best]), children[best]


def select_mate(strategy: MatingStrategy, state: PyramidState,
                first: tuple[int, int], partner_pop: int,
                rng: np.random.Generator) -> int:
    """Partner index in `partner_pop` for the given first parent."""
    pop = state.populations[first[0]]
    partner = state.populations[partner_pop]
    return strategy._choose(state, pop, first[1], partner, rng)[0]


# ---------------------------------------------------------------------------
# evaluation strategies


@dataclass
class EvalStrategy:
    """Scores partial solutions by completing them with partner genes and
    evaluating the assembled string with the full problem fitness."""

    kind: str
    grid: Optional[ToroidalGrid] = None

    def __post_init__(self):
        if self.kind not in EVAL_TOKENS:
            raise ConfigurationError(
                f"unknown evaluation strategy {self.kind!r}; valid: {', '.join(EVAL_TOKENS)}")

    def _draw(self, rule: str, state: PyramidState, cpop: SubPopulation,
              count: int, dest_slots: np.ndarray,
              rng: np.random.Generator) -> np.ndarray:
        if rule == "rank":
            order, cum = state.rank_table(cpop)
            return _roulette_many(order, cum, count, rng)
        if rule == "random":
            return rng.integers(0, cpop.size, size=count)
        if rule == "best":
            return np.full(count, argbest(cpop.penalized, cpop.sense))
        if rule == "grid":
            grid = self.grid or _ensure_grid(state)
            base = np.asarray(dest_slots) % grid.n_cells
            occupants = (cpop.size - base + grid.n_cells - 1) // grid.n_cells
            fallback = occupants <= 0
            picks = rng.integers(0, np.maximum(occupants, 1))
            idx = base + picks * grid.n_cells
            if fallback.any():
                idx[fallback] = rng.integers(0, cpop.size, size=int(fallback.sum()))
            return idx
        raise AssertionError(rule)  # pragma: no cover

    def _assemble(self, rule: str, state: PyramidState, pop: SubPopulation,
                  genes: np.ndarray, dest_slots: np.ndarray,
                  rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
        full = np.zeros((len(genes), state.problem.full_length), dtype=GENE_DTYPE)
        full[:, pop.mask.members] = genes
        for cpid in pop.complement_pops:
            cpop = state.populations[cpid]
            idx = self._draw(rule, state, cpop, len(genes), dest_slots, rng)
            full[:, cpop.mask.members] = cpop.genes[idx]
        return state.problem.evaluate_full_batch(full)

    def evaluate_batch(self, state: PyramidState, pop: SubPopulation,
                       genes: np.ndarray, dest_slots: np.ndarray,
                       rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
        """(raw, violation) for each row; double schemes keep the better of
        their two assemblies under the population's current penalty weight."""
        if pop.complement_pops is None:
            raise ConfigurationError(
                f"population {pop.pop_id}: no bottom populations tile the "
                f"complement of its mask, partnered evaluation is impossible")
        single = {"S": "rank", "R": "random", "B": "best", "D": "grid"}
        if self.kind in single:
            return self._assemble(single[self.kind], state, pop, genes,
                                  dest_slots, rng)
        first_rule = {"SR": "best", "BR": "rank", "RR": "random"}[self.kind]
        raw1, viol1 = self._assemble(first_rule, state, pop, genes, dest_slots, rng)
        raw2, viol2 = self._assemble("random", state, pop, genes, dest_slots, rng)
        w = pop.penalty.weight
        pen1 = penalize(raw1, viol1, w, pop.sense)
        pen2 = penalize(raw2, viol2, w, pop.sense)
        take1 = pen1 <= pen2 if pop.sense == "min" else pen1 >= pen2
        return np.where(take1, raw1, raw2), np.where(take1, viol1, viol2)


def evaluate_with_partners(strategy: EvalStrategy, state: PyramidState,
                           subject: tuple[int, int],
                           rng: np.random.Generator) -> float:
    """Penalized fitness of one existing individual under the strategy."""
    pop = state.populations[subject[0]]
    idx = subject[1]
    if len(pop.mask) == state.problem.full_length:
        raw, viol = state.problem.evaluate_full_batch(pop.genes[idx:idx + 1])
    else:
        raw, viol = strategy.evaluate_batch(state, pop, pop.genes[idx:idx + 1],
                                            np.array([idx]), rng)
    return float(penalize(raw, viol, pop.penalty.weight, pop.sense)[0])


def joined_topology(problem, config: PyramidConfig) -> list[PopulationSpec]:
    """The problem's default topology with every mask widened to the full
    string: a parallel GA whose islands exchange migrants along the original
    partner links, all evaluated with the full fitness."""
    full = GeneMask.full(problem.full_length)
    return [
        PopulationSpec(spec.pop_id, full, spec.level, spec.lower_partners,
                       spec.size, "full")
        for spec in problem.default_topology(config)
    ]
