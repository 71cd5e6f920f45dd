"""Quick invariant battery behind the `selftest` CLI subcommand.

A condensed version of the test suite's property checks, runnable without
pytest in a deployed environment.
"""

from __future__ import annotations

import numpy as np

from . import mall, nurse
from .engine import (
    GeneMask,
    Individual,
    PyramidConfig,
    cross_level_crossover,
    init_pyramid,
    penalize,
    rank_roulette_select,
    run,
    uniform_crossover,
)
from .partnering import EvalStrategy, MatingStrategy, ToroidalGrid, grid_neighbors


def _tiny_nurse_problem(seed=0):
    params = nurse.NurseGenParams(num_nurses=6, day_counts=(6,), night_counts=(6,),
                                  both_fraction=0.0, demand_tightness=0.5)
    return nurse.NurseProblem(nurse.generate_instance(params, seed))


def check_rank_selection() -> bool:
    rng = np.random.default_rng(7)
    problem = _tiny_nurse_problem()
    config = PyramidConfig(total_population=5, sub_population_size=5,
                           top_population_size=5)
    state = init_pyramid(problem, nurse.single_topology(problem, config), config,
                         rng)
    pop = state.populations[0]
    pop.penalized[:] = [5.0, 1.0, 3.0, 2.0, 4.0]
    draws = np.zeros(5)
    for _ in range(100_000):
        draws[rank_roulette_select(pop, rng)] += 1
    draws /= draws.sum()
    expected = np.array([1, 5, 3, 4, 2]) / 15.0
    return bool(np.all(np.abs(draws - expected) < 0.01))


def check_crossover_provenance() -> bool:
    rng = np.random.default_rng(1)
    mask = GeneMask(range(20))
    for _ in range(1000):
        a = Individual(rng.integers(0, 100, 20).astype(np.int32), mask)
        b = Individual(rng.integers(100, 200, 20).astype(np.int32), mask)
        c1, c2 = uniform_crossover(a, b, 0.66, rng)
        for child in (c1, c2):
            from_a = child.genes == a.genes
            from_b = child.genes == b.genes
            if not np.all(from_a | from_b):
                return False
        if not np.all((c1.genes == a.genes) == (c2.genes == b.genes)):
            return False
    return True


def check_mask_discipline() -> bool:
    rng = np.random.default_rng(2)
    for _ in range(1000):
        upper_members = np.sort(rng.choice(50, size=10, replace=False))
        lower_members = np.sort(rng.choice(upper_members, size=4, replace=False))
        upper_mask, lower_mask = GeneMask(upper_members), GeneMask(lower_members)
        upper = Individual(rng.integers(0, 9, 10).astype(np.int32), upper_mask)
        lower = Individual(rng.integers(10, 19, 4).astype(np.int32), lower_mask)
        child = cross_level_crossover(lower, upper)
        if child.mask != upper_mask:
            return False
        pos = lower_mask.positions_in(upper_mask)
        want = upper.genes.copy()
        want[pos] = lower.genes
        if not np.array_equal(child.genes, want):
            return False
    return True


def check_penalty_consistency() -> bool:
    rng = np.random.default_rng(3)
    problem = _tiny_nurse_problem(1)
    config = PyramidConfig(total_population=40, sub_population_size=4,
                           top_population_size=12)
    state = init_pyramid(problem, problem.default_topology(config), config, rng)
    for pop in state.populations:
        want = penalize(pop.raw, pop.violation, pop.penalty.weight, pop.sense)
        if not np.allclose(pop.penalized, want):
            return False
    return True


def check_size_decompose() -> bool:
    for count in range(0, 500):
        sizes = mall.size_decompose(count)
        if sum(sizes) != count or sizes != sorted(sizes, reverse=True):
            return False
        if any(s not in (1, 2, 3) for s in sizes):
            return False
        if sizes.count(3) != count // 3:
            return False
    return True


def check_grid_symmetry() -> bool:
    for rows, cols in ((3, 3), (5, 4), (10, 10)):
        grid = ToroidalGrid(rows, cols)
        for r in range(rows):
            for c in range(cols):
                for cell in grid_neighbors(grid, (r, c)):
                    if (r, c) not in grid_neighbors(grid, cell):
                        return False
                if len(set(grid_neighbors(grid, (r, c)))) != 8:
                    return False
    return True


def check_better_of_two() -> bool:
    import copy

    rng = np.random.default_rng(4)
    problem = _tiny_nurse_problem(2)
    config = PyramidConfig(total_population=40, sub_population_size=4,
                           top_population_size=12)
    state = init_pyramid(problem, problem.default_topology(config), config, rng)
    pop = state.populations[0]
    double, single = EvalStrategy("RR"), EvalStrategy("R")
    w = pop.penalty.weight
    genes = pop.genes[:4]
    slots = np.arange(4)
    for _ in range(200):
        probe = np.random.default_rng(int(rng.integers(1 << 30)))
        clone = copy.deepcopy(probe)
        raw, viol = double.evaluate_batch(state, pop, genes, slots, probe)
        pen = penalize(raw, viol, w, pop.sense)
        # the double scheme consumes two single-sample draws in sequence
        raw1, viol1 = single.evaluate_batch(state, pop, genes, slots, clone)
        raw2, viol2 = single.evaluate_batch(state, pop, genes, slots, clone)
        pen1 = penalize(raw1, viol1, w, pop.sense)
        pen2 = penalize(raw2, viol2, w, pop.sense)
        if not np.allclose(pen, np.minimum(pen1, pen2)):
            return False
    return True


def check_determinism() -> bool:
    problem = _tiny_nurse_problem(3)
    config = PyramidConfig(total_population=40, sub_population_size=4,
                           top_population_size=12, stagnation_limit=10,
                           rng_seed=11)
    results = []
    for _ in range(2):
        rng = np.random.default_rng(11)
        state = init_pyramid(problem, problem.default_topology(config), config, rng)
        results.append(run(state, MatingStrategy("C"), None, rng).to_record())
    return results[0] == results[1]


CHECKS = (
    ("rank selection frequencies", check_rank_selection),
    ("crossover gene provenance", check_crossover_provenance),
    ("cross-level mask discipline", check_mask_discipline),
    ("penalty consistency", check_penalty_consistency),
    ("size decomposition totals", check_size_decompose),
    ("grid neighborhood symmetry", check_grid_symmetry),
    ("better-of-two evaluation", check_better_of_two),
    ("run determinism", check_determinism),
)


def run_selftest(print_fn=print) -> int:
    failures = 0
    for name, check in CHECKS:
        ok = check()
        print_fn(f"{'ok  ' if ok else 'FAIL'} {name}")
        failures += 0 if ok else 1
    return 0 if failures == 0 else 1
