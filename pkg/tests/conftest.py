import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from pyramidga import mall, nurse
from pyramidga.engine import PyramidConfig, init_pyramid


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def small_nurse_instance():
    params = nurse.NurseGenParams(num_nurses=9, demand_tightness=0.8)
    return nurse.generate_instance(params, 101)


@pytest.fixture(scope="session")
def tiny_nurse_instance():
    params = nurse.NurseGenParams(num_nurses=4, day_counts=(6,), night_counts=(6,),
                                  both_fraction=0.0, demand_tightness=0.6)
    return nurse.generate_instance(params, 7)


@pytest.fixture(scope="session")
def small_mall_instance():
    params = mall.MallGenParams(locations=20, areas=4, num_types=5, tightness=0.5)
    return mall.generate_mall_instance(params, 202)


def make_nurse_state(instance, seed=3, total=80, sub=8, stagnation=10, **kw):
    problem = nurse.NurseProblem(instance)
    config = PyramidConfig(total_population=total, sub_population_size=sub,
                           stagnation_limit=stagnation, rng_seed=seed, **kw)
    gen = np.random.default_rng(seed)
    state = init_pyramid(problem, problem.default_topology(config), config, gen)
    return state, gen


def make_mall_state(instance, seed=3, total=72, sub=12, stagnation=10, **kw):
    problem = mall.MallProblem(instance)
    config = PyramidConfig(total_population=total, sub_population_size=sub,
                           stagnation_limit=stagnation, sense="max",
                           rng_seed=seed, **kw)
    gen = np.random.default_rng(seed)
    state = init_pyramid(problem, problem.default_topology(config), config, gen)
    return state, gen
