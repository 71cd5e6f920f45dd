"""Nurse problem: feasible sets, fitness terms, generator, balance test,
hillclimber and instance files, cross-checked against the dumb oracles."""

import json

import numpy as np
import pytest

from pyramidga import nurse
from pyramidga.engine import ConfigurationError, InstanceError

from oracles import (
    dumb_nurse_cover,
    dumb_nurse_fitness,
    dumb_nurse_sub_fitness,
    enumerate_nurse,
    random_roster,
)


def hand_instance(demand, pref=None, n=3, grades=(1, 2, 3)):
    """Three nurses, each with a handful of day-4 / night-3 patterns."""
    patterns = np.zeros((4, 14), dtype=np.int8)
    patterns[0, 0:4] = 1          # days 0-3
    patterns[1, 3:7] = 1          # days 3-6
    patterns[2, 7:10] = 1         # nights 0-2
    patterns[3, 11:14] = 1        # nights 4-6
    pref_cost = np.zeros((n, 4), dtype=np.int32) if pref is None else np.array(pref)
    return nurse.NurseInstance(
        num_nurses=n,
        pattern_cover=patterns,
        grade_of=np.array(grades[:n]),
        pref_cost=pref_cost,
        day_shifts=np.full(n, 4),
        night_shifts=np.full(n, 3),
        both_shifts=np.zeros(n),
        demand=np.array(demand),
        instance_id="hand",
    )


def zero_demand():
    return np.zeros((14, 3), dtype=np.int64)


# ---------------------------------------------------------------------------
# feasible patterns


class TestFeasiblePatterns:
    def test_day_pattern_with_matching_count_included(self):
        inst = hand_instance(zero_demand())
        fset = nurse.feasible_patterns(inst, 0)
        assert 0 in fset and 1 in fset  # both day-4 patterns

    def test_night_pattern_with_wrong_count_excluded(self):
        inst = hand_instance(zero_demand())
        inst.night_shifts[:] = 4
        fset = nurse.feasible_patterns(inst, 0)
        assert 2 not in fset and 3 not in fset  # night patterns cover 3 slots

    def test_day_only_universe_has_binomial_size(self):
        params = nurse.NurseGenParams(num_nurses=4, day_counts=(4,),
                                      night_counts=(), both_fraction=0.0,
                                      demand_tightness=0.0)
        inst = nurse.generate_instance(params, 0)
        assert inst.num_patterns == 35  # C(7,4)
        assert all(len(f) == 35 for f in inst.feasible)

    def test_mixed_patterns_only_for_mixed_contracts(self):
        inst = hand_instance(zero_demand())
        mixed = np.zeros((1, 14), dtype=np.int8)
        mixed[0, [0, 1, 7, 8]] = 1  # 2 days + 2 nights
        inst2 = nurse.NurseInstance(
            num_nurses=3, pattern_cover=np.vstack([inst.pattern_cover, mixed]),
            grade_of=inst.grade_of, pref_cost=np.zeros((3, 5), dtype=np.int32),
            day_shifts=inst.day_shifts, night_shifts=inst.night_shifts,
            both_shifts=np.array([4, 0, 0]), demand=zero_demand(),
            instance_id="hand2")
        assert 4 in inst2.feasible[0]      # mixed contract of 4 shifts
        assert 4 not in inst2.feasible[1]  # day/night contract only


# ---------------------------------------------------------------------------
# cover and fitness


class TestCover:
    def test_uncovered_slot_is_zero(self):
        inst = hand_instance(zero_demand())
        solution = [0, 0, 0]  # everyone on days 0-3
        assert nurse.cover(inst, solution, 10, 3) == 0

    def test_grade_one_nurse_counts_at_every_level(self):
        inst = hand_instance(zero_demand())
        solution = [0, 2, 2]  # nurse 0 (grade 1) on days 0-3
        for grade in (1, 2, 3):
            assert nurse.cover(inst, solution, 0, grade) == 1

    def test_monotone_in_grade(self):
        inst = nurse.generate_instance(nurse.NurseGenParams(num_nurses=8), 3)
        rng = np.random.default_rng(0)
        for _ in range(50):
            sol = random_roster(inst, rng)
            for k in range(14):
                covers = [nurse.cover(inst, sol, k, g) for g in (1, 2, 3)]
                assert covers == sorted(covers)

    def test_matches_recount_oracle(self):
        inst = nurse.generate_instance(nurse.NurseGenParams(num_nurses=5), 9)
        rng = np.random.default_rng(1)
        for _ in range(20):
            sol = random_roster(inst, rng)
            for k in range(14):
                for g in (1, 2, 3):
                    assert nurse.cover(inst, sol, k, g) == \
                        dumb_nurse_cover(inst, sol, k, g)


class TestFullFitness:
    def test_zero_demand_means_no_penalty(self):
        inst = hand_instance(zero_demand(), pref=[[3, 0, 0, 0]] * 3)
        raw, viol, pen = nurse.full_fitness(inst, [0, 0, 0], 50.0)
        assert viol == 0.0 and pen == raw == 9.0

    def test_single_uncovered_unit(self):
        demand = zero_demand()
        demand[5] = [0, 0, 1]  # one nurse of any grade wanted on day 5
        pref = [[7, 50, 50, 50], [0, 50, 50, 50], [0, 50, 50, 50]]
        inst = hand_instance(demand, pref=pref)
        raw, viol, pen = nurse.full_fitness(inst, [0, 0, 0], 10.0)
        assert (raw, viol, pen) == (7.0, 1.0, 17.0)

    def test_matches_dumb_oracle_on_random_solutions(self):
        inst = nurse.generate_instance(
            nurse.NurseGenParams(num_nurses=7, demand_tightness=0.9), 21)
        rng = np.random.default_rng(2)
        for _ in range(100):
            sol = random_roster(inst, rng)
            raw, viol, pen = nurse.full_fitness(inst, sol, 13.0)
            assert (raw, viol, pen) == dumb_nurse_fitness(inst, sol, 13.0)

    def test_tiny_instance_optimum_matches_enumeration(self, tiny_nurse_instance):
        best_raw, best_sol = enumerate_nurse(tiny_nurse_instance)
        raw, viol, _ = nurse.full_fitness(tiny_nurse_instance, best_sol, 10.0)
        assert viol == 0.0 and raw == best_raw

    def test_feasible_iff_all_constraints_hold(self):
        inst = nurse.generate_instance(
            nurse.NurseGenParams(num_nurses=6, demand_tightness=0.7), 4)
        rng = np.random.default_rng(3)
        for _ in range(60):
            sol = random_roster(inst, rng)
            _, viol, _ = nurse.full_fitness(inst, sol, 1.0)
            holds = all(
                nurse.cover(inst, sol, k, g) >= inst.demand[k, g - 1]
                for k in range(14) for g in (1, 2, 3))
            assert (viol == 0.0) == holds


class TestSubFitness:
    def test_zero_block_demand_means_no_violation(self):
        demand = zero_demand()
        demand[:, 1:] = 2  # demand only beyond grade 1
        inst = hand_instance(demand)
        partial = [0]  # the grade-1 nurse
        raw, viol, _ = nurse.sub_fitness(inst, partial, (1,), 5.0)
        assert viol == 0.0

    def test_all_grades_equals_full_violation_at_top_level(self):
        inst = nurse.generate_instance(
            nurse.NurseGenParams(num_nurses=8, demand_tightness=1.0), 5)
        rng = np.random.default_rng(4)
        for _ in range(40):
            sol = random_roster(inst, rng)
            _, sub_viol, _ = nurse.sub_fitness(inst, sol, (1, 2, 3), 1.0)
            top_term = sum(
                max(int(inst.demand[k, 2]) - dumb_nurse_cover(inst, sol, k, 3), 0)
                for k in range(14))
            assert sub_viol == top_term

    def test_matches_recount_oracle(self):
        inst = nurse.generate_instance(
            nurse.NurseGenParams(num_nurses=9, demand_tightness=1.0), 6)
        rng = np.random.default_rng(5)
        for grades in ((1,), (2,), (3,), (1, 2), (2, 3), (1, 3), (1, 2, 3)):
            members = inst.grade_members(grades)
            for _ in range(20):
                partial = np.array([rng.choice(inst.feasible[i]) for i in members])
                got = nurse.sub_fitness(inst, partial, grades, 7.0)
                assert got == dumb_nurse_sub_fitness(inst, partial, grades, 7.0)

    def test_raw_is_additive_over_grade_singletons(self):
        inst = nurse.generate_instance(nurse.NurseGenParams(num_nurses=10), 7)
        rng = np.random.default_rng(6)
        for _ in range(20):
            sol = random_roster(inst, rng)
            full_raw, _, _ = nurse.full_fitness(inst, sol, 1.0)
            parts = 0.0
            for g in (1, 2, 3):
                members = inst.grade_members((g,))
                raw, _, _ = nurse.sub_fitness(inst, sol[members], (g,), 1.0)
                parts += raw
            assert parts == full_raw

    def test_unknown_grade_set_rejected(self):
        inst = hand_instance(zero_demand())
        with pytest.raises(ConfigurationError):
            nurse.sub_fitness(inst, [0], (2, 9), 1.0)


# ---------------------------------------------------------------------------
# generator


class TestGenerateInstance:
    def test_deterministic_in_seed(self):
        params = nurse.NurseGenParams(num_nurses=12)
        a = nurse.instance_to_dict(nurse.generate_instance(params, 33))
        b = nurse.instance_to_dict(nurse.generate_instance(params, 33))
        assert a == b

    def test_different_seeds_differ(self):
        params = nurse.NurseGenParams(num_nurses=12)
        a = nurse.instance_to_dict(nurse.generate_instance(params, 33))
        b = nurse.instance_to_dict(nurse.generate_instance(params, 34))
        assert a != b

    def test_zero_tightness_makes_everything_feasible(self):
        params = nurse.NurseGenParams(num_nurses=10, demand_tightness=0.0)
        inst = nurse.generate_instance(params, 8)
        assert inst.demand.sum() == 0
        rng = np.random.default_rng(7)
        for _ in range(20):
            _, viol, _ = nurse.full_fitness(inst, random_roster(inst, rng), 1.0)
            assert viol == 0.0

    def test_default_universe_size(self):
        inst = nurse.generate_instance(nurse.NurseGenParams(num_nurses=6), 1)
        # all day choices of 4 and 5 plus night choices of 3 and 4
        assert inst.num_patterns == 35 + 21 + 35 + 35

    def test_moderate_tightness_instances_remain_solvable(self):
        from pyramidga.engine import PyramidConfig, init_pyramid, run
        from pyramidga.partnering import MatingStrategy
        feasible = 0
        for seed in range(10):
            inst = nurse.generate_instance(
                nurse.NurseGenParams(num_nurses=30, demand_tightness=0.8), seed)
            problem = nurse.NurseProblem(inst)
            config = PyramidConfig(total_population=200, sub_population_size=20,
                                   stagnation_limit=15, rng_seed=seed)
            state = init_pyramid(problem, problem.default_topology(config),
                                 config, np.random.default_rng(seed))
            result = run(state, MatingStrategy("C"), None,
                         np.random.default_rng(seed))
            feasible += result.feasible
        assert feasible >= 9

    def test_demand_is_cumulative_monotone(self):
        inst = nurse.generate_instance(nurse.NurseGenParams(num_nurses=25), 2)
        assert np.all(np.diff(inst.demand, axis=1) >= 0)

    def test_nurses_sorted_by_grade(self):
        inst = nurse.generate_instance(nurse.NurseGenParams(num_nurses=20), 3)
        assert np.all(np.diff(inst.grade_of) >= 0)


# ---------------------------------------------------------------------------
# balance predicate


class TestIsBalanced:
    def test_feasible_solution_is_balanced(self):
        inst = hand_instance(zero_demand())
        assert nurse.is_balanced(inst, [0, 0, 2])

    def test_surplus_covering_shortage_within_day_block(self):
        demand = zero_demand()
        demand[0] = [0, 0, 1]   # wants one nurse on day 0
        inst = hand_instance(demand)
        # nurse 0 and 1 both work days 3-6: day 0 short by 1, days 3-6 surplus
        assert nurse.is_balanced(inst, [1, 1, 2])

    def test_night_shortage_without_surplus_is_unbalanced(self):
        demand = zero_demand()
        demand[8] = [0, 0, 2]
        demand[9] = [0, 0, 2]
        inst = hand_instance(demand)
        # single night nurse covers nights 0-2 once: shortage 2, surplus 1
        assert not nurse.is_balanced(inst, [0, 1, 2])


# ---------------------------------------------------------------------------
# hillclimber


class TestHillclimb:
    def test_local_optimum_is_fixed_point(self):
        inst = hand_instance(zero_demand(), pref=[[0, 9, 9, 9]] * 3)
        result = nurse.hillclimb(inst, [0, 0, 0], 10.0)
        assert np.array_equal(result.solution, [0, 0, 0])
        assert result.moves == 0

    def test_reassignment_to_covering_zero_cost_pattern(self):
        demand = zero_demand()
        demand[5] = [0, 0, 1]  # day 5 uncovered unless someone works days 3-6
        pref = [[0, 0, 9, 9], [5, 5, 9, 9], [5, 5, 9, 9]]
        inst = hand_instance(demand, pref=pref)
        start = [0, 0, 2]
        _, _, pen0 = nurse.full_fitness(inst, start, 10.0)
        result = nurse.hillclimb(inst, start, 10.0)
        _, viol, pen1 = nurse.full_fitness(inst, result.solution, 10.0)
        assert pen1 < pen0 and viol == 0.0
        assert result.moves >= 1

    def test_never_below_enumerated_optimum(self, tiny_nurse_instance):
        best_raw, _ = enumerate_nurse(tiny_nurse_instance)
        rng = np.random.default_rng(8)
        weight = 25.0
        for _ in range(30):
            start = random_roster(tiny_nurse_instance, rng)
            result = nurse.hillclimb(tiny_nurse_instance, start, weight)
            raw, viol, pen = nurse.full_fitness(tiny_nurse_instance,
                                                result.solution, weight)
            if viol == 0.0:
                assert raw >= best_raw

    def test_never_worsens(self):
        inst = nurse.generate_instance(
            nurse.NurseGenParams(num_nurses=8, demand_tightness=0.9), 10)
        rng = np.random.default_rng(9)
        for _ in range(50):
            start = random_roster(inst, rng)
            weight = float(rng.uniform(1, 60))
            _, _, pen0 = nurse.full_fitness(inst, start, weight)
            result = nurse.hillclimb(inst, start, weight, move_budget=2000)
            _, _, pen1 = nurse.full_fitness(inst, result.solution, weight)
            assert pen1 <= pen0 + 1e-9

    def test_respects_move_budget(self):
        inst = nurse.generate_instance(
            nurse.NurseGenParams(num_nurses=12, demand_tightness=1.0), 11)
        start = np.array([f[0] for f in inst.feasible])
        result = nurse.hillclimb(inst, start, 30.0, move_budget=100)
        assert result.evaluations <= 100

    def test_swap_move_found(self):
        # costs force a pattern exchange: each nurse's cheap pattern is held
        # by the other and no single reassignment helps
        demand = zero_demand()
        pref = [[9, 0, 50, 50], [0, 9, 50, 50], [0, 0, 0, 0]]
        inst = hand_instance(demand, pref=pref)
        result = nurse.hillclimb(inst, [0, 1, 2], 10.0)
        assert result.solution[0] == 1 and result.solution[1] == 0
        _, _, pen = nurse.full_fitness(inst, result.solution, 10.0)
        assert pen == 0.0

    def test_input_not_mutated(self):
        inst = hand_instance(zero_demand(), pref=[[5, 0, 9, 9]] * 3)
        start = np.array([0, 0, 0], dtype=np.int32)
        nurse.hillclimb(inst, start, 10.0)
        assert np.array_equal(start, [0, 0, 0])


# ---------------------------------------------------------------------------
# instance files


class TestInstanceFiles:
    def test_round_trip_is_lossless(self, tmp_path, small_nurse_instance):
        path = tmp_path / "ward.json"
        nurse.save_instance(small_nurse_instance, path)
        loaded = nurse.load_instance(path)
        assert nurse.instance_to_dict(loaded) == \
            nurse.instance_to_dict(small_nurse_instance)
        for name in ("pattern_cover", "grade_of", "pref_cost", "day_shifts",
                     "night_shifts", "both_shifts", "demand"):
            assert np.array_equal(getattr(loaded, name),
                                  getattr(small_nurse_instance, name))

    def test_resave_is_byte_identical(self, tmp_path, small_nurse_instance):
        first = tmp_path / "a.json"
        second = tmp_path / "b.json"
        nurse.save_instance(small_nurse_instance, first)
        nurse.save_instance(nurse.load_instance(first), second)
        assert first.read_bytes() == second.read_bytes()

    def test_wrong_format_rejected(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"format": "other", "version": 1}))
        with pytest.raises(InstanceError):
            nurse.load_instance(path)

    def test_empty_feasible_set_rejected(self):
        patterns = np.zeros((1, 14), dtype=np.int8)
        patterns[0, 0:4] = 1
        with pytest.raises(InstanceError):
            nurse.NurseInstance(
                num_nurses=1, pattern_cover=patterns, grade_of=np.array([1]),
                pref_cost=np.zeros((1, 1), dtype=np.int32),
                day_shifts=np.array([5]), night_shifts=np.array([3]),
                both_shifts=np.array([0]), demand=zero_demand(),
                instance_id="bad")
