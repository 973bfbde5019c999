"""Group partitions, category structure and (u, v) fairness caps."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import FormatError, InputError

CAP_TIE_EPS = 1e-9


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    """Philox (counter-based) generator for ``seed`` and a stream path.

    Streams are split through ``SeedSequence.spawn_key``: the generator for
    ``(seed, a, b)`` depends only on those integers, never on how many
    other streams were drawn before it.
    """
    if seed < 0:
        raise InputError("seed must be nonnegative")
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(s) for s in stream))
    return np.random.Generator(np.random.Philox(ss))


def _as_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return make_rng(int(seed))


class GroupStructure:
    """A partition of items ``0..n-1`` into ``p`` groups (ids ``0..p-1``)."""

    def __init__(self, assignment, p: int | None = None, labels=None):
        a = np.array(assignment, dtype=np.int64, copy=True)
        if a.ndim != 1:
            raise InputError("group assignment must be one-dimensional")
        if a.size and a.min() < 0:
            raise InputError("group ids must be nonnegative")
        if p is None:
            p = int(a.max()) + 1 if a.size else 0
        if a.size and a.max() >= p:
            raise InputError("group id exceeds group count")
        a.setflags(write=False)
        self.assignment = a
        self.p = int(p)
        self.sizes = np.bincount(a, minlength=self.p)
        self._members = tuple(np.flatnonzero(a == g) for g in range(self.p))
        self.labels = tuple(labels) if labels is not None else tuple(range(self.p))
        if len(self.labels) != self.p:
            raise InputError("one label per group required")

    @property
    def n(self) -> int:
        return self.assignment.size

    @property
    def gamma(self) -> np.ndarray:
        return self.sizes / self.n

    @property
    def gamma_min(self) -> float:
        return float(self.gamma.min()) if self.p else 0.0

    def members(self, group: int) -> np.ndarray:
        return self._members[group]

    def mask(self, group: int) -> np.ndarray:
        return self.assignment == group

    def counts(self, subset) -> np.ndarray:
        idx = np.fromiter((int(i) for i in subset), dtype=np.int64)
        return np.bincount(self.assignment[idx], minlength=self.p)

    def __eq__(self, other):
        if not isinstance(other, GroupStructure):
            return NotImplemented
        return self.p == other.p and np.array_equal(self.assignment, other.assignment)

    def __repr__(self):
        return f"GroupStructure(n={self.n}, sizes={self.sizes.tolist()})"

    @classmethod
    def from_members(cls, members: Sequence, n: int) -> "GroupStructure":
        a = np.full(n, -1, dtype=np.int64)
        for g, items in enumerate(members):
            for i in items:
                if a[i] != -1:
                    raise InputError(f"item {i} appears in two groups")
                a[i] = g
        if np.any(a < 0):
            raise InputError("every item must belong to exactly one group")
        return cls(a, len(members))


def sample_groups(n: int, sizes: Sequence[int], seed) -> GroupStructure:
    """Uniformly random partition: ``G_1`` is ``sizes[0]`` items drawn
    without replacement, ``G_2`` is drawn from the rest, and so on."""
    sizes = [int(s) for s in sizes]
    if any(s < 0 for s in sizes):
        raise InputError("group sizes must be nonnegative")
    if sum(sizes) != n:
        raise InputError(f"group sizes sum to {sum(sizes)}, expected n={n}")
    perm = _as_rng(seed).permutation(n)
    a = np.empty(n, dtype=np.int64)
    start = 0
    for g, s in enumerate(sizes):
        a[perm[start:start + s]] = g
        start += s
    return GroupStructure(a, len(sizes))


def split_sizes(n: int, fractions: Sequence[float]) -> list[int]:
    """Integer group sizes for the given fractions; the last group absorbs rounding."""
    sizes = [int(round(f * n)) for f in fractions[:-1]]
    sizes.append(n - sum(sizes))
    if sizes[-1] < 0:
        raise InputError("group fractions exceed 1")
    return sizes


@dataclass(frozen=True)
class CategoryStructure:
    members: tuple
    disjoint: bool

    @property
    def m(self) -> int:
        return len(self.members)

    @classmethod
    def from_sets(cls, sets: Sequence) -> "CategoryStructure":
        members = tuple(frozenset(int(i) for i in s) for s in sets)
        seen: set[int] = set()
        disjoint = True
        for s in members:
            if seen & s:
                disjoint = False
            seen |= s
        return cls(members, disjoint)

    @classmethod
    def from_labels(cls, labels, m: int | None = None) -> "CategoryStructure":
        labels = np.asarray(labels, dtype=np.int64)
        m = int(labels.max()) + 1 if m is None else m
        return cls(tuple(frozenset(np.flatnonzero(labels == j).tolist()) for j in range(m)), True)

    def sizes(self) -> list[int]:
        return [len(s) for s in self.members]

    def category_of(self, item: int) -> list[int]:
        return [j for j, s in enumerate(self.members) if item in s]


def categories_from_support(latent) -> CategoryStructure:
    """``C_j = {i : W[i, j] > 0}``."""
    W = np.asarray(getattr(latent, "values", latent), dtype=float)
    return CategoryStructure.from_sets(np.flatnonzero(W[:, j] > 0) for j in range(W.shape[1]))


@dataclass(frozen=True)
class FairnessConstraint:
    """``|S & G_l| <= (u_l + v_l * gamma_l) * k`` for every group ``l``."""

    u: tuple
    v: tuple

    def __init__(self, u, v):
        u = tuple(float(x) for x in u)
        v = tuple(float(x) for x in v)
        if len(u) != len(v):
            raise InputError("u and v must have equal length")
        if any(x < 0 for x in u + v):
            raise InputError("u and v must be nonnegative")
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "v", v)

    @property
    def p(self) -> int:
        return len(self.u)

    @classmethod
    def proportional(cls, p: int) -> "FairnessConstraint":
        return cls([0.0] * p, [1.0] * p)

    @classmethod
    def equal(cls, p: int) -> "FairnessConstraint":
        return cls([1.0 / p] * p, [0.0] * p)

    @classmethod
    def from_config(cls, cfg: dict) -> "FairnessConstraint":
        from .config import floats

        try:
            return cls(floats(cfg["fair.u"]), floats(cfg["fair.v"]))
        except KeyError as exc:
            raise FormatError(f"missing constraint key {exc.args[0]}") from None


def fairness_caps(constraint: FairnessConstraint, groups: GroupStructure, k: int) -> np.ndarray:
    """Integer caps ``floor((u_l + v_l gamma_l) k + 1e-9)``."""
    if k < 1:
        raise InputError("k must be at least 1")
    if constraint.p != groups.p:
        raise InputError(f"constraint has {constraint.p} groups, partition has {groups.p}")
    u = np.asarray(constraint.u)
    v = np.asarray(constraint.v)
    raw = (u + v * groups.gamma) * k
    return np.floor(raw + CAP_TIE_EPS).astype(np.int64)


def read_groups_csv(path, n: int | None = None) -> GroupStructure:
    labels = _read_label_csv(path, "group")
    if n is not None and len(labels) != n:
        raise InputError(f"{path}: {len(labels)} items, expected {n}")
    return GroupStructure(labels)


def write_groups_csv(path, groups: GroupStructure) -> None:
    _write_label_csv(path, "group", groups.assignment)


def read_categories_csv(path, m: int | None = None) -> CategoryStructure:
    """``item,category`` rows; an item may appear on several rows."""
    sets: dict[int, set[int]] = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"item", "category"} <= set(reader.fieldnames):
            raise FormatError(f"{path}: expected header 'item,category', got {reader.fieldnames}")
        for row in reader:
            try:
                sets.setdefault(int(row["category"]), set()).add(int(row["item"]))
            except ValueError as exc:
                raise FormatError(f"{path}: {exc}") from exc
    count = m if m is not None else (max(sets) + 1 if sets else 0)
    return CategoryStructure.from_sets([sets.get(j, set()) for j in range(count)])


def write_categories_csv(path, categories: CategoryStructure) -> None:
    rows = sorted((i, j) for j, s in enumerate(categories.members) for i in s)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["item", "category"])
        w.writerows(rows)


def _read_label_csv(path, column: str) -> list[int]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"item", column} <= set(reader.fieldnames):
            raise FormatError(f"{path}: expected header 'item,{column}', got {reader.fieldnames}")
        labels = {}
        for row in reader:
            try:
                labels[int(row["item"])] = int(row[column])
            except ValueError as exc:
                raise FormatError(f"{path}: {exc}") from exc
    n = len(labels)
    if sorted(labels) != list(range(n)):
        raise FormatError(f"{path}: item ids must be exactly 0..{n - 1}")
    return [labels[i] for i in range(n)]


def _write_label_csv(path, column: str, labels) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["item", column])
        for i, g in enumerate(labels):
            w.writerow([i, int(g)])

