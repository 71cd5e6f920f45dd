"""Exhaustive enumeration of tiny instances, for validating heuristic runs."""

from __future__ import annotations

from itertools import product
from typing import Optional

import numpy as np

from . import mall, nurse
from .engine import GENE_DTYPE, ConfigurationError


class OracleResult:
    def __init__(self, best_raw: Optional[float], best_genes: Optional[list[int]],
                 space: int):
        self.best_raw = best_raw
        self.best_genes = best_genes
        self.space = space

    @property
    def feasible_exists(self) -> bool:
        return self.best_raw is not None


def _search_space(counts) -> int:
    space = 1
    for c in counts:
        space *= int(c)
    return space


def enumerate_nurse_optimum(instance: nurse.NurseInstance,
                            limit: int = 5_000_000) -> OracleResult:
    """Best feasible raw cost over every possible roster."""
    space = _search_space(len(f) for f in instance.feasible)
    if space > limit:
        raise ConfigurationError(f"search space {space} exceeds the oracle limit")
    best_raw = None
    best_genes = None
    chunk = []
    batchsize = 65536

    def flush():
        nonlocal best_raw, best_genes
        if not chunk:
            return
        genes = np.array(chunk, dtype=GENE_DTYPE)
        raw, viol = nurse.full_fitness_batch(instance, genes)
        feas = np.flatnonzero(viol == 0)
        if len(feas):
            i = feas[np.argmin(raw[feas])]
            if best_raw is None or raw[i] < best_raw:
                best_raw = float(raw[i])
                best_genes = genes[i].tolist()
        chunk.clear()

    for combo in product(*(f.tolist() for f in instance.feasible)):
        chunk.append(combo)
        if len(chunk) >= batchsize:
            flush()
    flush()
    return OracleResult(best_raw, best_genes, space)


def enumerate_mall_optimum(instance: mall.MallInstance,
                           limit: int = 5_000_000) -> OracleResult:
    """Best feasible rent over every possible type assignment."""
    t_count, length = instance.num_types, instance.locations
    space = t_count ** length
    if space > limit:
        raise ConfigurationError(f"search space {space} exceeds the oracle limit")
    best_raw = None
    best_genes = None
    batchsize = 65536
    for start in range(0, space, batchsize):
        codes = np.arange(start, min(start + batchsize, space), dtype=np.int64)
        genes = np.empty((len(codes), length), dtype=GENE_DTYPE)
        rest = codes.copy()
        for pos in range(length - 1, -1, -1):
            genes[:, pos] = rest % t_count
            rest //= t_count
        raw, viol = mall.rent_terms_batch(instance, genes)
        feas = np.flatnonzero(viol == 0)
        if len(feas):
            i = feas[np.argmax(raw[feas])]
            if best_raw is None or raw[i] > best_raw:
                best_raw = float(raw[i])
                best_genes = genes[i].tolist()
    return OracleResult(best_raw, best_genes, space)
