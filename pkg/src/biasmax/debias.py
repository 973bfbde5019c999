"""Debiased selection using only the reference group's observed utilities.

Part 1 estimates how much of the budget each category deserves by
maximizing a rescaled objective over the reference group, whose
utilities are assumed unbiased. Part 2 spends each category's budget
with a greedy that keeps groups proportionally represented inside the
category.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigurationError, InputError
from .groups import CAP_TIE_EPS, CategoryStructure, GroupStructure
from .maximizers import SelectionResult, _greedy
from .objective import ObjectiveSpec, as_matrix, eval_objective


def apportion(total: int, weights: Sequence[float], min_one: bool = True) -> np.ndarray:
    """Largest-remainder split of ``total`` in proportion to ``weights``.

    Remainder ties go to the lower index. With ``min_one`` every positive
    weight receives at least 1, taken from whichever entry is furthest
    above its quota (possible only when there are at most ``total``
    positive weights).
    """
    w = np.asarray(weights, dtype=float)
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise InputError("apportionment weights must be finite and nonnegative")
    total = int(total)
    if total < 0:
        raise InputError("cannot apportion a negative total")
    out = np.zeros(w.size, dtype=np.int64)
    if total == 0 or w.sum() == 0:
        return out
    quota = total * w / w.sum()
    out = np.floor(quota).astype(np.int64)
    rem = quota - out
    short = total - int(out.sum())
    order = np.lexsort((np.arange(w.size), -rem))
    out[order[:short]] += 1
    if min_one and np.count_nonzero(w) <= total:
        for j in np.flatnonzero((w > 0) & (out == 0)):
            excess = np.where(out >= 2, out - quota, -np.inf)
            donor = int(np.argmax(excess))
            out[donor] -= 1
            out[j] += 1
    return out


@dataclass
class BudgetVector:
    """Per-category budgets derived from the reference-group solution."""

    k: np.ndarray
    counts: np.ndarray
    scale: float
    quotas: np.ndarray
    reference_set: list = field(default_factory=list)
    seeds: list = field(default_factory=list)
    flags: set = field(default_factory=set)

    @property
    def total(self) -> int:
        return int(self.k.sum())

    def __getitem__(self, j):
        return int(self.k[j])

    def __len__(self):
        return self.k.size


def _reference_members(groups: GroupStructure, reference: int) -> np.ndarray:
    if not 0 <= reference < groups.p:
        raise ConfigurationError(f"reference group {reference} does not exist")
    members = groups.members(reference)
    if members.size == 0:
        raise ConfigurationError("reference group is empty")
    return members


def rescaled_objective(observed, groups: GroupStructure, curves, reference: int = 0) -> ObjectiveSpec:
    """``F~(T) = sum_j g_j((n / |G_1|) * sum_{i in T & G_1} W_hat[i, j])``.

    Returned as an objective over all items; rows outside the reference
    group are zero so they contribute nothing.
    """
    W = as_matrix(observed)
    if groups.n != W.shape[0]:
        raise InputError("partition size does not match utilities")
    members = _reference_members(groups, reference)
    scale = W.shape[0] / members.size
    scaled = np.zeros_like(W)
    scaled[members] = W[members] * scale
    return ObjectiveSpec(curves, scaled)


def part1_budgets(observed, k: int, groups: GroupStructure, categories: CategoryStructure,
                  curves, reference: int = 0) -> BudgetVector:
    """Seed each category, grow greedily on the rescaled objective, apportion ``k``."""
    if k < 1:
        raise InputError("k must be at least 1")
    W = as_matrix(observed)
    n = W.shape[0]
    members = _reference_members(groups, reference)
    target = (k * members.size) // n
    if target == 0:
        raise ConfigurationError(
            f"k={k} is too small for a reference group of {members.size}/{n} items")
    if categories.m != W.shape[1]:
        raise InputError(f"{categories.m} categories for {W.shape[1]} attributes")
    flags = set()
    if not categories.disjoint:
        warnings.warn("categories overlap; budgets are heuristic", RuntimeWarning, stacklevel=2)
        flags.add("overlapping_categories")

    spec = rescaled_objective(W, groups, curves, reference)
    gains = spec.curve_values(spec.W).sum(axis=1) - spec.value_from_sums(np.zeros(spec.m))
    in_ref = groups.mask(reference)
    per_cat = math.ceil(math.sqrt(k))
    seeds: list[int] = []
    seen: set[int] = set()
    for members_j in categories.members:
        pool = np.array(sorted(i for i in members_j if in_ref[i]), dtype=np.int64)
        if pool.size == 0:
            continue
        ranked = pool[np.lexsort((pool, -gains[pool]))]
        for i in ranked[:min(per_cat, pool.size)].tolist():
            if i not in seen:
                seen.add(i)
                seeds.append(i)

    if len(seeds) > target:
        flags.add("seeds_overflow")
        chosen = list(seeds)
    else:
        chosen, _ = _greedy(spec, target, allowed=in_ref, start=seeds)

    counts = np.array([sum(1 for i in chosen if i in c) for c in categories.members], dtype=np.int64)
    kj = apportion(k, counts)
    quotas = k * counts / counts.sum() if counts.sum() else np.zeros(counts.size)
    return BudgetVector(kj, counts, n / members.size, quotas, chosen, seeds, flags)


def category_caps(k: int, need: int, groups: GroupStructure, cell_sizes) -> np.ndarray:
    """Per-group caps inside one category.

    Starts from ``floor(k * |G_l & C_j| / n)``. If those cannot hold
    ``need`` items, each cap is raised to the largest-remainder share of
    ``need`` in proportion to the cell sizes.
    """
    cells = np.asarray(cell_sizes, dtype=np.int64)
    caps = np.floor(k * cells / groups.n + CAP_TIE_EPS).astype(np.int64)
    if np.minimum(caps, cells).sum() < need:
        caps = np.maximum(caps, apportion(need, cells, min_one=False))
    return caps


def part2_select(observed, budgets: BudgetVector, groups: GroupStructure,
                 categories: CategoryStructure, curves, k: Optional[int] = None) -> SelectionResult:
    """Spend each category's budget with a group-capped greedy on ``g_j``."""
    W = as_matrix(observed)
    k = budgets.total if k is None else int(k)
    flags = set()
    order: list[int] = []
    category_of: dict[int, int] = {}
    for j, members_j in enumerate(categories.members):
        kj = int(budgets.k[j])
        if kj == 0 or not members_j:
            continue
        need = min(kj, len(members_j))
        allowed = np.zeros(W.shape[0], dtype=bool)
        allowed[list(members_j)] = True
        cells = np.bincount(groups.assignment[allowed], minlength=groups.p)
        caps = category_caps(k, need, groups, cells)
        sub = ObjectiveSpec([curves[j]], W[:, j:j + 1])
        picked, _ = _greedy(sub, need, groups, caps, allowed=allowed)
        if len(picked) < kj:
            flags.add("budget_unmet")
        for i in picked:
            if i in category_of:
                flags.add("budget_unmet")
                continue
            category_of[i] = j
            order.append(i)
    if len(order) < k:
        flags.add("budget_unmet")
    spec = ObjectiveSpec(curves, W)
    return SelectionResult(order, eval_objective(spec, order), group_counts=groups.counts(order),
                           budgets=budgets, flags=flags, category_of=category_of)


def algorithm1(observed, k: int, groups: GroupStructure, categories: CategoryStructure,
               curves, latent=None, reference: int = 0) -> SelectionResult:
    """Both parts end to end; ``latent`` (optional) is used only for scoring."""
    budgets = part1_budgets(observed, k, groups, categories, curves, reference)
    res = part2_select(observed, budgets, groups, categories, curves, k)
    res.flags |= budgets.flags
    if latent is not None:
        res.score(ObjectiveSpec(curves, latent))
    return res
