"""Greedy maximizers and exact oracles for objectives in the family.

All maximizers break ties by the lowest item index and never look at
anything but the objective they are handed.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional

import numpy as np

from .errors import InputError, SizeError
from .groups import GroupStructure
from .objective import ObjectiveSpec, eval_objective

EXHAUSTIVE_LIMIT = 10**7


@dataclass
class SelectionResult:
    """A chosen subset plus audit data.

    ``order`` lists items in the order they were selected; ``subset`` is the
    same items as a sorted tuple. ``trace[t]`` is the objective value after
    ``t + 1`` selections (greedy runs only).
    """

    order: list
    observed_value: float
    group_counts: Optional[np.ndarray] = None
    latent_value: Optional[float] = None
    budgets: object = None
    flags: set = field(default_factory=set)
    trace: list = field(default_factory=list)
    category_of: dict = field(default_factory=dict)

    @property
    def subset(self) -> tuple:
        return tuple(sorted(self.order))

    def __len__(self):
        return len(self.order)

    def score(self, latent_spec: ObjectiveSpec) -> "SelectionResult":
        self.latent_value = eval_objective(latent_spec, self.order)
        return self


def _greedy(spec: ObjectiveSpec, k: int, groups=None, caps=None, allowed=None, start=()):
    """Core loop shared by every greedy variant.

    Runs until ``k`` items are chosen (counting ``start``) or no item is
    admissible. Returns the full order, ``start`` first, and the value trace.
    """
    W = spec.W
    n, m = W.shape
    taken = np.zeros(n, dtype=bool)
    if allowed is not None:
        blocked = ~np.asarray(allowed, dtype=bool)
    else:
        blocked = np.zeros(n, dtype=bool)
    if groups is not None:
        caps = np.asarray(caps, dtype=np.int64)
        used = np.zeros(groups.p, dtype=np.int64)
        blocked = blocked | (caps[groups.assignment] <= 0)
    sums = np.zeros(m)
    order = [int(i) for i in start]
    for i in order:
        taken[i] = True
        sums = sums + W[i]
    current = spec.value_from_sums(sums)
    trace = []
    for _ in range(k - len(order)):
        cand = np.flatnonzero(~(taken | blocked))
        if cand.size == 0:
            break
        values = spec.curve_values(sums + W[cand]).sum(axis=1)
        best = int(cand[int(np.argmax(values - current))])
        taken[best] = True
        order.append(best)
        sums = sums + W[best]
        current = spec.value_from_sums(sums)
        trace.append(current)
        if groups is not None:
            g = groups.assignment[best]
            used[g] += 1
            if used[g] >= caps[g]:
                blocked |= groups.assignment == g
    return order, trace


def greedy_cardinality(spec: ObjectiveSpec, k: int) -> SelectionResult:
    """Standard greedy: ``k`` rounds of adding the item with the largest gain."""
    if k < 1:
        raise InputError("k must be at least 1")
    order, trace = _greedy(spec, k)
    res = SelectionResult(order, eval_objective(spec, order), trace=trace)
    if len(order) < k:
        res.flags.add("budget_unmet")
    return res


def greedy_with_caps(spec: ObjectiveSpec, k: int, groups: GroupStructure, caps) -> SelectionResult:
    """Greedy restricted to sets with ``|S & G_l| <= caps[l]``.

    Stops early, flagging ``budget_unmet``, once every group is full.
    """
    if k < 1:
        raise InputError("k must be at least 1")
    caps = np.asarray(caps, dtype=np.int64)
    if caps.shape != (groups.p,):
        raise InputError(f"need {groups.p} caps, got {caps.shape}")
    if np.any(caps < 0):
        raise InputError("caps must be nonnegative")
    if groups.n != spec.n:
        raise InputError("partition size does not match objective")
    order, trace = _greedy(spec, k, groups, caps)
    res = SelectionResult(order, eval_objective(spec, order),
                          group_counts=groups.counts(order), trace=trace)
    if len(order) < k:
        res.flags.add("budget_unmet")
    return res


class CapFeasibility:
    """Feasibility predicate ``|S & G_l| <= caps[l]`` with a batched form."""

    def __init__(self, groups: GroupStructure, caps):
        self.assignment = groups.assignment
        self.p = groups.p
        self.caps = np.asarray(caps, dtype=np.int64)

    def __call__(self, subset) -> bool:
        counts = np.bincount(self.assignment[list(subset)], minlength=self.p)
        return bool(np.all(counts <= self.caps))

    def batch(self, combos: np.ndarray) -> np.ndarray:
        labels = self.assignment[combos]
        ok = np.ones(combos.shape[0], dtype=bool)
        for g in range(self.p):
            ok &= (labels == g).sum(axis=1) <= self.caps[g]
        return ok


def _combo_chunks(n: int, size: int, chunk: int = 200_000):
    it = itertools.combinations(range(n), size)
    while True:
        block = list(itertools.islice(it, chunk))
        if not block:
            return
        yield np.array(block, dtype=np.int64).reshape(len(block), size)


def exhaustive_opt(spec: ObjectiveSpec, k: int,
                   feasibility: Optional[Callable] = None,
                   limit: int = EXHAUSTIVE_LIMIT):
    """Exact ``max F(S)`` over feasible ``S`` with ``|S| <= k``.

    Returns ``(subset, value)`` with ``subset`` a sorted tuple; among equal
    values the lexicographically smallest subset wins. ``feasibility`` is a
    predicate over sorted item tuples; if it has a ``batch`` method taking
    an ``(N, s)`` index array that is used instead.
    """
    n = spec.n
    k = min(int(k), n)
    if k < 0:
        raise InputError("k must be nonnegative")
    if math.comb(n, k) > limit:
        raise SizeError(f"C({n}, {k}) = {math.comb(n, k)} exceeds the limit {limit}")
    W = spec.W
    best_val, best_set = -math.inf, None
    for size in range(k + 1):
        if size == 0:
            if feasibility is None or feasibility(()):
                best_val, best_set = 0.0, ()
            continue
        for combos in _combo_chunks(n, size):
            vals = spec.curve_values(W[combos].sum(axis=1)).sum(axis=1)
            if feasibility is not None:
                if hasattr(feasibility, "batch"):
                    ok = feasibility.batch(combos)
                else:
                    ok = np.fromiter((bool(feasibility(tuple(c))) for c in combos.tolist()),
                                     dtype=bool, count=len(combos))
                vals = np.where(ok, vals, -np.inf)
            top = int(np.argmax(vals))
            val = float(vals[top])
            if val == -math.inf:
                continue
            cand = tuple(int(x) for x in combos[top])
            if val > best_val or (val == best_val and cand < best_set):
                best_val, best_set = val, cand
    if best_set is None:
        return (), 0.0
    return best_set, eval_objective(spec, best_set)


class TwoTypeOpt(NamedTuple):
    counts: tuple
    value: float


def _two_type_cells(latent: np.ndarray, observed: np.ndarray, groups: GroupStructure):
    if groups.p != 2:
        raise InputError("two-type optimizer needs exactly two groups")
    rows, types = np.unique(latent, axis=0, return_inverse=True)
    types = types.reshape(-1)
    if rows.shape[0] > 2:
        raise InputError(f"instance has {rows.shape[0]} distinct latent rows, at most 2 allowed")
    # item 0's row is type A
    type_a = types == types[0]
    cells = []
    for is_a in (True, False):
        for g in (0, 1):
            items = np.flatnonzero((type_a == is_a) & (groups.assignment == g))
            if items.size:
                vals = observed[items]
                if not np.all(vals == vals[0]):
                    raise InputError("observed rows differ within a type/group cell")
                vec = vals[0]
            else:
                vec = np.zeros(observed.shape[1])
            cells.append((items, vec))
    return cells  # order: A&G1, A&G2, B&G1, B&G2


def two_type_exact_opt(instance, groups: GroupStructure, caps, k: Optional[int] = None) -> TwoTypeOpt:
    """Exact observed-utility maximizer for two item types and two groups.

    ``instance`` supplies ``latent_spec`` and ``observed(groups)`` (a
    :class:`~biasmax.datagen.NegativeInstance` does). Returns the selected
    counts ``(a1, a2, b1, b2)`` over the cells A&G1, A&G2, B&G1, B&G2 and
    the latent value of the corresponding subset.
    """
    k = instance.k if k is None else int(k)
    counts = two_type_counts(instance.latent_spec, instance.observed(groups), groups, caps, k)
    subset = materialize_counts(instance.latent_spec.W, instance.observed(groups), groups, counts)
    return TwoTypeOpt(counts, eval_objective(instance.latent_spec, subset))


def materialize_counts(latent, observed, groups: GroupStructure, counts) -> list:
    """The subset taking the lowest-index ``counts[c]`` items of each cell."""
    cells = _two_type_cells(np.asarray(latent), np.asarray(observed), groups)
    out = []
    for (items, _), c in zip(cells, counts):
        out.extend(items[:c].tolist())
    return sorted(out)


def two_type_counts(spec: ObjectiveSpec, observed, groups: GroupStructure, caps, k: int) -> tuple:
    """Cell counts maximizing the observed objective under caps and ``|S| <= k``.

    One group's pair of counts is enumerated; for each pair the other group
    fills its remaining room completely (the objective is monotone) and the
    split between its two cells is found by binary search, since the
    objective restricted to that line is concave.
    """
    observed = np.asarray(observed, dtype=float)
    cells = _two_type_cells(spec.W, observed, groups)
    size = np.array([c[0].size for c in cells])
    vec = np.array([c[1] for c in cells])
    caps = np.asarray(caps, dtype=np.int64)
    room = [min(int(caps[g]), k, int(size[g] + size[g + 2])) for g in (0, 1)]
    outer = 0 if room[0] <= room[1] else 1
    inner = 1 - outer
    oa, ob = outer, outer + 2  # A-cell and B-cell of the enumerated group
    ia, ib = inner, inner + 2

    pairs = [(x, y) for x in range(min(size[oa], room[outer]) + 1)
             for y in range(min(size[ob], room[outer] - x) + 1)]
    x = np.array([p[0] for p in pairs], dtype=np.int64)
    y = np.array([p[1] for p in pairs], dtype=np.int64)
    r = np.minimum(min(int(caps[inner]), int(size[ia] + size[ib])), k - x - y)
    r = np.maximum(r, 0)
    lo = np.maximum(0, r - size[ib])
    hi = np.minimum(size[ia], r)
    base = x[:, None] * vec[oa] + y[:, None] * vec[ob]

    def h(t):
        s = base + t[:, None] * vec[ia] + (r - t)[:, None] * vec[ib]
        return spec.curve_values(s).sum(axis=1)

    while np.any(lo < hi):
        active = lo < hi
        mid = (lo + hi) // 2
        up = h(np.minimum(mid + 1, hi)) > h(mid)
        lo = np.where(active & up, mid + 1, lo)
        hi = np.where(active & ~up, mid, hi)
    vals = h(lo)
    best = int(np.argmax(vals))
    out = [0, 0, 0, 0]
    out[oa], out[ob] = int(x[best]), int(y[best])
    out[ia], out[ib] = int(lo[best]), int(r[best] - lo[best])
    return tuple(out)
