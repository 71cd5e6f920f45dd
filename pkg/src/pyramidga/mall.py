"""Mall tenant selection: assign a shop type to every location so that total
rent is maximised under mall-wide count bounds and size caps.

Locations form contiguous strips, one strip per area. Equal-typed locations
within an area merge greedily into shops of three locations (large), two
(medium) or one (small); rent per shop scales with its size factor, the
area's attractiveness and how close the mall-wide count of its type is to
the ideal. Adjacent locations of the same shop group earn a synergy bonus.

Count bounds and the small/medium/large caps are global, which is exactly
what the per-area sub-fitness cannot see: it prices an area's shops on
within-area counts and carries no violation term.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .engine import (
    GENE_DTYPE,
    GeneMask,
    InstanceError,
    PopulationSpec,
    ProblemDefinition,
    PyramidConfig,
)

SIZE_FACTORS = np.array([1.0, 1.9, 2.7])  # small, medium, large
SIZE_NAMES = ("small", "medium", "large")


@dataclass
class MallInstance:
    locations: int
    area_sizes: tuple[int, ...]
    num_types: int
    group_of: np.ndarray  # (T,) shop group per type
    attract: np.ndarray  # (T, areas) area attractiveness per type
    base_rent: np.ndarray  # (T, areas) fixed rent per shop
    revenue: np.ndarray  # (T,) revenue coefficient per type
    count_min: np.ndarray  # (T,) minimum shops of the type mall-wide
    count_ideal: np.ndarray
    count_max: np.ndarray
    size_caps: np.ndarray  # (3,) max small / medium / large shops mall-wide
    synergy_bonus: float
    instance_id: str = "mall"

    def __post_init__(self):
        self.group_of = np.asarray(self.group_of, dtype=np.int16)
        self.attract = np.asarray(self.attract, dtype=np.float64)
        self.base_rent = np.asarray(self.base_rent, dtype=np.float64)
        self.revenue = np.asarray(self.revenue, dtype=np.float64)
        self.count_min = np.asarray(self.count_min, dtype=np.int64)
        self.count_ideal = np.asarray(self.count_ideal, dtype=np.int64)
        self.count_max = np.asarray(self.count_max, dtype=np.int64)
        self.size_caps = np.asarray(self.size_caps, dtype=np.int64)
        if sum(self.area_sizes) != self.locations:
            raise InstanceError("area sizes must sum to the location count")
        if np.any(self.count_min > self.count_ideal) or \
                np.any(self.count_ideal > self.count_max):
            raise InstanceError("count bounds must satisfy min <= ideal <= max")
        if np.any(self.attract < 0) or np.any(self.base_rent < 0) or \
                np.any(self.revenue < 0) or self.synergy_bonus < 0:
            raise InstanceError("rent parameters must be non-negative")
        self.area_of = np.repeat(np.arange(len(self.area_sizes), dtype=np.int8),
                                 self.area_sizes)
        self.area_members = [np.flatnonzero(self.area_of == a)
                             for a in range(len(self.area_sizes))]
        self._same_area = self.area_of[:-1] == self.area_of[1:]

    @property
    def num_areas(self) -> int:
        return len(self.area_sizes)


def size_decompose(count: int) -> list[int]:
    """Greedy largest-first split of a same-type location count into shop
    sizes: as many 3s as possible, then a 2 or a 1 for the remainder."""
    if count < 0:
        raise ValueError("count must be non-negative")
    sizes = [3] * (count // 3)
    if count % 3:
        sizes.append(count % 3)
    return sizes


def _class_counts(counts: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorised decomposition: (small, medium, large) shop counts."""
    large = counts // 3
    rem = counts % 3
    return (rem == 1).astype(np.int64), (rem == 2).astype(np.int64), large


def rent_terms_batch(instance: MallInstance,
                     genes: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(rent, violation) per row for a (batch, locations) type matrix."""
    genes = np.asarray(genes)
    batch = len(genes)
    t_count, a_count = instance.num_types, instance.num_areas
    flat = (np.arange(batch)[:, None] * (t_count * a_count)
            + genes.astype(np.int64) * a_count + instance.area_of[None, :])
    counts = np.bincount(flat.ravel(), minlength=batch * t_count * a_count)
    counts = counts.reshape(batch, t_count, a_count)

    small, medium, large = _class_counts(counts)
    shops_of_type = (small + medium + large).sum(axis=2)  # (batch, T)
    ideal = instance.count_ideal
    countfactor = np.maximum(
        0.0, 1.0 - np.abs(shops_of_type - ideal) / np.maximum(ideal, 1))

    size_weight = small * SIZE_FACTORS[0] + medium * SIZE_FACTORS[1] \
        + large * SIZE_FACTORS[2]
    raw = (instance.base_rent[None] * size_weight).sum(axis=(1, 2))
    raw += (instance.revenue[None, :, None] * instance.attract[None]
            * size_weight * countfactor[:, :, None]).sum(axis=(1, 2))

    groups = instance.group_of[genes]
    adjacent = ((groups[:, :-1] == groups[:, 1:])
                & instance._same_area[None, :]).sum(axis=1)
    raw += instance.synergy_bonus * adjacent

    viol = (np.maximum(instance.count_min - shops_of_type, 0)
            + np.maximum(shops_of_type - instance.count_max, 0)).sum(axis=1)
    class_totals = np.stack([small.sum(axis=(1, 2)), medium.sum(axis=(1, 2)),
                             large.sum(axis=(1, 2))], axis=1)
    viol = viol + np.maximum(class_totals - instance.size_caps[None], 0).sum(axis=1)
    return raw, viol.astype(np.float64)


def full_rent(instance: MallInstance, solution: Sequence[int],
              weight: float) -> tuple[float, float, float]:
    """Total rent, bound/cap violation, and the penalty-adjusted rent
    (violations are subtracted since rent is maximised)."""
    raw, viol = rent_terms_batch(instance, np.asarray(solution)[None, :])
    return float(raw[0]), float(viol[0]), float(raw[0] - weight * viol[0])


def area_rent_batch(instance: MallInstance, area: int,
                    genes: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Within-area rent for partial solutions over one area's locations.

    Count factors use within-area counts (the mall-wide count is unknown at
    this level) and no violation is charged: every modelled constraint is
    global, so an area on its own has nothing to violate.
    """
    genes = np.asarray(genes)
    batch = len(genes)
    t_count = instance.num_types
    flat = np.arange(batch)[:, None] * t_count + genes.astype(np.int64)
    counts = np.bincount(flat.ravel(), minlength=batch * t_count)
    counts = counts.reshape(batch, t_count)

    small, medium, large = _class_counts(counts)
    shops_of_type = small + medium + large
    countfactor = np.maximum(
        0.0, 1.0 - np.abs(shops_of_type - instance.count_ideal)
        / np.maximum(instance.count_ideal, 1))
    size_weight = small * SIZE_FACTORS[0] + medium * SIZE_FACTORS[1] \
        + large * SIZE_FACTORS[2]
    raw = (instance.base_rent[:, area][None] * size_weight).sum(axis=1)
    raw += (instance.revenue[None] * instance.attract[:, area][None]
            * size_weight * countfactor).sum(axis=1)

    groups = instance.group_of[genes]
    raw += instance.synergy_bonus * (groups[:, :-1] == groups[:, 1:]).sum(axis=1)
    return raw, np.zeros(batch)


def area_sub_fitness(instance: MallInstance, partial: Sequence[int],
                     area: int, weight: float) -> tuple[float, float, float]:
    """Sub-fitness of a partial solution covering exactly one area."""
    if not (0 <= area < instance.num_areas):
        raise ValueError(f"area {area} out of range")
    genes = np.asarray(partial)[None, :]
    if genes.shape[1] != instance.area_sizes[area]:
        raise ValueError("partial solution length does not match the area")
    raw, viol = area_rent_batch(instance, area, genes)
    return float(raw[0]), float(viol[0]), float(raw[0] - weight * viol[0])


# ---------------------------------------------------------------------------
# synthetic instance generation


@dataclass
class MallGenParams:
    """`tightness` in [0, 1] narrows the count bounds and size caps around
    the shop counts a uniform random assignment would produce."""

    locations: int = 100
    areas: int = 5
    num_types: int = 30
    tightness: float = 0.5


def _binomial_pmf(n: int, p: float) -> np.ndarray:
    pmf = np.zeros(n + 1)
    for c in range(n + 1):
        pmf[c] = math.comb(n, c) * p ** c * (1 - p) ** (n - c)
    return pmf


def _expected_class_totals(area_sizes, num_types: int) -> np.ndarray:
    """Expected small/medium/large shop totals of a uniform random mall."""
    totals = np.zeros(3)
    for size in area_sizes:
        pmf = _binomial_pmf(size, 1.0 / num_types)
        counts = np.arange(size + 1)
        small, medium, large = _class_counts(counts)
        totals[0] += num_types * (pmf * small).sum()
        totals[1] += num_types * (pmf * medium).sum()
        totals[2] += num_types * (pmf * large).sum()
    return totals


def generate_mall_instance(params: MallGenParams, seed: int) -> MallInstance:
    if params.num_types < 2:
        raise InstanceError("need at least two shop types")
    if not (0 <= params.tightness <= 1):
        raise InstanceError("tightness must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    t_count, a_count = params.num_types, params.areas
    base = params.locations // a_count
    area_sizes = tuple(base + (1 if a < params.locations % a_count else 0)
                       for a in range(a_count))
    slack = 1.0 - params.tightness

    scale = rng.uniform(0.5, 2.0, size=t_count)
    attract = rng.uniform(0.5, 1.5, size=(t_count, a_count))
    base_rent = rng.uniform(5.0, 15.0, size=(t_count, a_count)) * scale[:, None]
    revenue = rng.uniform(10.0, 30.0, size=t_count) * scale

    expected_classes = _expected_class_totals(area_sizes, t_count)
    expected_shops = expected_classes.sum()

    for _ in range(20):
        ideal = np.maximum(
            1, np.round(rng.uniform(0.6, 1.4, size=t_count)
                        * expected_shops / t_count)).astype(np.int64)
        count_min = np.floor(
            ideal * params.tightness * rng.uniform(0.5, 1.0, t_count)
        ).astype(np.int64)
        spread = np.maximum(1, np.round((ideal + 1) * (0.3 + 1.7 * slack)))
        count_max = (ideal + spread).astype(np.int64)
        if count_min.sum() <= params.locations:
            break
    else:
        raise InstanceError("could not draw feasible count bounds")

    # the small-shop cap squeezes below the random expectation while the
    # medium/large caps open up, so tight instances force same-type
    # consolidation inside areas without becoming unsatisfiable
    multipliers = np.array([0.75 + 1.0 * slack, 1.6 + 1.0 * slack,
                            2.5 + 1.5 * slack])
    size_caps = np.maximum(
        np.ceil(expected_classes * multipliers).astype(np.int64), 1)
    while int(size_caps @ np.array([1, 2, 3])) < params.locations:
        size_caps[2] += 1  # guarantee the caps can absorb every location

    return MallInstance(
        locations=params.locations,
        area_sizes=area_sizes,
        num_types=t_count,
        group_of=np.arange(t_count) // 5,
        attract=attract,
        base_rent=base_rent,
        revenue=revenue,
        count_min=count_min,
        count_ideal=ideal,
        count_max=count_max,
        size_caps=size_caps,
        synergy_bonus=float(rng.uniform(2.0, 8.0)),
        instance_id=f"mall-t{t_count}-s{seed}",
    )


# ---------------------------------------------------------------------------
# engine adapter and topology


class MallProblem(ProblemDefinition):
    """Engine-facing view of a mall instance."""

    sense = "max"

    def __init__(self, instance: MallInstance):
        self.instance = instance
        self.full_length = instance.locations
        self.instance_id = instance.instance_id
        self.allele_counts = np.full(instance.locations, instance.num_types,
                                     dtype=np.int64)
        self.allele_table = np.tile(
            np.arange(instance.num_types, dtype=GENE_DTYPE),
            (instance.locations, 1))

    def evaluate_batch(self, eval_key, mask: GeneMask, genes: np.ndarray):
        if eval_key == "full":
            return rent_terms_batch(self.instance, genes)
        return area_rent_batch(self.instance, eval_key, genes)

    def default_topology(self, config: PyramidConfig) -> list[PopulationSpec]:
        return pyramid_topology(self, config)


def pyramid_topology(problem: MallProblem, config: PyramidConfig
                     ) -> list[PopulationSpec]:
    """One population per area plus the top population on the full rent."""
    inst = problem.instance
    sub = config.sub_population_size
    top = config.top_population_size
    if top is None:
        top = config.total_population - inst.num_areas * sub
    specs = [
        PopulationSpec(a, GeneMask(inst.area_members[a]), 0, (), sub, a)
        for a in range(inst.num_areas)
    ]
    specs.append(PopulationSpec(
        inst.num_areas, GeneMask.full(inst.locations), 1,
        tuple(range(inst.num_areas)), top, "full"))
    return specs


# ---------------------------------------------------------------------------
# instance files


def instance_to_dict(instance: MallInstance) -> dict:
    return {
        "format": "mall-instance",
        "version": 1,
        "instance_id": instance.instance_id,
        "locations": instance.locations,
        "area_sizes": list(instance.area_sizes),
        "num_types": instance.num_types,
        "groups": instance.group_of.tolist(),
        "attractiveness": instance.attract.tolist(),
        "base_rent": instance.base_rent.tolist(),
        "revenue": instance.revenue.tolist(),
        "count_min": instance.count_min.tolist(),
        "count_ideal": instance.count_ideal.tolist(),
        "count_max": instance.count_max.tolist(),
        "size_caps": instance.size_caps.tolist(),
        "synergy_bonus": instance.synergy_bonus,
    }


def instance_from_dict(data: dict) -> MallInstance:
    if data.get("format") != "mall-instance" or data.get("version") != 1:
        raise InstanceError("not a version-1 mall instance file")
    return MallInstance(
        locations=data["locations"],
        area_sizes=tuple(data["area_sizes"]),
        num_types=data["num_types"],
        group_of=np.array(data["groups"]),
        attract=np.array(data["attractiveness"]),
        base_rent=np.array(data["base_rent"]),
        revenue=np.array(data["revenue"]),
        count_min=np.array(data["count_min"]),
        count_ideal=np.array(data["count_ideal"]),
        count_max=np.array(data["count_max"]),
        size_caps=np.array(data["size_caps"]),
        synergy_bonus=data["synergy_bonus"],
        instance_id=data["instance_id"],
    )


def save_instance(instance: MallInstance, path) -> None:
    Path(path).write_text(json.dumps(instance_to_dict(instance), indent=1))


def load_instance(path) -> MallInstance:
    return instance_from_dict(json.loads(Path(path).read_text()))
