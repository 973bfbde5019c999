"""Concave-over-modular objectives.

An objective is a list of ``m`` increasing concave curves and an ``n x m``
nonnegative utility matrix ``W``; its value on a subset ``S`` is
``sum_j g_j(sum_{i in S} W[i, j])``. Items are indexed ``0..n-1``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import InputError, PreconditionError

GAIN_TOL = 1e-9
SUM_RTOL = 1e-12
CLAMP_EPS = 1e-12

CURVE_KINDS = (
    "linear",
    "sqrt",
    "scaled_sqrt",
    "log1p",
    "weighted_log1p",
    "cube_root",
    "negexp_coverage",
)
_PARAM_KINDS = {"scaled_sqrt", "weighted_log1p", "negexp_coverage"}


@dataclass(frozen=True)
class ConcaveCurve:
    """An increasing concave scalar function with ``g(0) = 0``.

    ``param`` is the scale for ``scaled_sqrt`` (``lam * sqrt(x)``) and
    ``weighted_log1p`` (``w * log(1 + x)``), and the category prior for
    ``negexp_coverage`` (``prior * (1 - exp(-x))``).
    """

    kind: str
    param: float = 1.0

    def __post_init__(self):
        if self.kind not in CURVE_KINDS:
            raise InputError(f"unknown curve kind {self.kind!r}")
        if self.kind == "negexp_coverage":
            if not 0.0 <= self.param <= 1.0:
                raise InputError("negexp_coverage prior must lie in [0, 1]")
        elif self.kind in _PARAM_KINDS and not self.param > 0:
            raise InputError(f"{self.kind} needs a positive parameter")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        k = self.kind
        if k == "linear":
            return x * 1.0
        if k == "sqrt":
            return np.sqrt(x)
        if k == "scaled_sqrt":
            return self.param * np.sqrt(x)
        if k == "log1p":
            return np.log1p(x)
        if k == "weighted_log1p":
            return self.param * np.log1p(x)
        if k == "cube_root":
            return np.cbrt(x)
        return self.param * -np.expm1(-x)

    def __str__(self):
        if self.kind in _PARAM_KINDS:
            return f"{self.kind}:{self.param:g}"
        return self.kind

    @classmethod
    def parse(cls, text: str) -> "ConcaveCurve":
        """Parse ``kind`` or ``kind:param``."""
        kind, _, param = text.strip().partition(":")
        kind = kind.strip().lower()
        if param:
            try:
                return cls(kind, float(param))
            except ValueError as exc:
                raise InputError(f"bad curve parameter in {text!r}") from exc
        return cls(kind)


Linear = ConcaveCurve("linear")
Sqrt = ConcaveCurve("sqrt")
Log1p = ConcaveCurve("log1p")
CubeRoot = ConcaveCurve("cube_root")


def ScaledSqrt(lam: float) -> ConcaveCurve:
    return ConcaveCurve("scaled_sqrt", lam)


def WeightedLog1p(w: float) -> ConcaveCurve:
    return ConcaveCurve("weighted_log1p", w)


def NegExpCoverage(prior: float) -> ConcaveCurve:
    return ConcaveCurve("negexp_coverage", prior)


class UtilityMatrix:
    """Read-only nonnegative ``n x m`` utility matrix."""

    def __init__(self, values):
        arr = np.array(values, dtype=float, copy=True)
        if arr.ndim == 1:
            arr = arr[:, None]
        if arr.ndim != 2:
            raise InputError("utility matrix must be two-dimensional")
        if not np.all(np.isfinite(arr)):
            raise InputError("utility matrix has non-finite entries")
        if np.any(arr < 0):
            raise InputError("utility matrix has negative entries")
        arr.setflags(write=False)
        self._values = arr

    @property
    def values(self) -> np.ndarray:
        return self._values

    @property
    def n(self) -> int:
        return self._values.shape[0]

    @property
    def m(self) -> int:
        return self._values.shape[1]

    def __array__(self, dtype=None, copy=None):
        return self._values if dtype is None else self._values.astype(dtype)

    def __eq__(self, other):
        if not isinstance(other, UtilityMatrix):
            return NotImplemented
        return np.array_equal(self._values, other._values)

    def __repr__(self):
        return f"UtilityMatrix(n={self.n}, m={self.m})"

    def tau(self) -> float:
        """Supremum of the ``tau`` values for which :meth:`within_tau` holds.

        Any valid ``tau`` is strictly below this number. An all-zero matrix
        gives ``inf``.
        """
        nz = self._values[self._values > 0]
        if nz.size == 0:
            return math.inf
        return float(min(nz.min(), 1.0 / nz.max()))

    def within_tau(self, tau: float) -> bool:
        if tau <= 0:
            raise InputError("tau must be positive")
        nz = self._values[self._values > 0]
        return bool(np.all((nz > tau) & (nz < 1.0 / tau)))

    def to_csv(self, path) -> None:
        write_utilities_csv(path, self)

    @classmethod
    def from_csv(cls, path) -> "UtilityMatrix":
        return read_utilities_csv(path)


def as_matrix(values) -> np.ndarray:
    if isinstance(values, UtilityMatrix):
        return values.values
    return np.asarray(values, dtype=float)


class ObjectiveSpec:
    """Curves plus utilities; immutable after construction."""

    __slots__ = ("curves", "utilities")

    def __init__(self, curves: Sequence[ConcaveCurve], utilities):
        if not isinstance(utilities, UtilityMatrix):
            utilities = UtilityMatrix(utilities)
        curves = tuple(curves)
        if len(curves) != utilities.m:
            raise InputError(
                f"{len(curves)} curves given for {utilities.m} attributes")
        object.__setattr__(self, "curves", curves)
        object.__setattr__(self, "utilities", utilities)

    def __setattr__(self, name, value):
        raise AttributeError("ObjectiveSpec is immutable")

    def __repr__(self):
        return f"ObjectiveSpec(curves={[str(c) for c in self.curves]}, n={self.n}, m={self.m})"

    @property
    def n(self) -> int:
        return self.utilities.n

    @property
    def m(self) -> int:
        return self.utilities.m

    @property
    def W(self) -> np.ndarray:
        return self.utilities.values

    def with_utilities(self, utilities) -> "ObjectiveSpec":
        return ObjectiveSpec(self.curves, utilities)

    def curve_values(self, sums) -> np.ndarray:
        """Apply ``g_j`` column-wise to ``sums`` (shape ``(..., m)``)."""
        sums = np.asarray(sums, dtype=float)
        out = np.empty_like(sums)
        for j, g in enumerate(self.curves):
            out[..., j] = g(sums[..., j])
        return out

    def value_from_sums(self, sums) -> float:
        return float(self.curve_values(sums).sum(axis=-1))

    def column_sums(self, subset: Iterable[int]) -> np.ndarray:
        idx = _check_subset(subset, self.n)
        sums = np.zeros(self.m)
        # ascending item order keeps the result bit-reproducible
        for i in idx:
            sums += self.W[i]
        return sums

    def __call__(self, subset) -> float:
        return eval_objective(self, subset)


def _check_subset(subset, n: int) -> list[int]:
    idx = sorted(set(int(i) for i in subset))
    if idx and (idx[0] < 0 or idx[-1] >= n):
        raise InputError(f"item index out of range [0, {n})")
    return idx


def eval_objective(spec: ObjectiveSpec, subset: Iterable[int]) -> float:
    """``sum_j g_j(sum_{i in subset} W[i, j])``; 0 on the empty set."""
    idx = _check_subset(subset, spec.n)
    if not idx:
        return 0.0
    return spec.value_from_sums(spec.column_sums(idx))


def marginal_gain(spec: ObjectiveSpec, subset: Iterable[int], item: int) -> float:
    subset = set(int(i) for i in subset)
    item = int(item)
    if item in subset:
        raise InputError(f"item {item} already in subset")
    if not 0 <= item < spec.n:
        raise InputError(f"item index {item} out of range")
    return eval_objective(spec, subset | {item}) - eval_objective(spec, subset)


def decompose_by_category(spec: ObjectiveSpec, categories, subset) -> np.ndarray:
    """Per-category contributions ``g_j(sum_{i in S & C_j} W[i, j])``.

    Only meaningful when categories are disjoint and match the support of
    ``W``; under those conditions the parts sum to ``eval_objective``.
    """
    if not categories.disjoint:
        raise PreconditionError("categories must be disjoint")
    if categories.m != spec.m:
        raise PreconditionError("category count does not match attribute count")
    idx = _check_subset(subset, spec.n)
    W = spec.W
    for j, members in enumerate(categories.members):
        outside = np.ones(spec.n, dtype=bool)
        outside[list(members)] = False
        if np.any(W[outside, j] > 0):
            raise PreconditionError(
                f"attribute {j} has support outside category {j}")
    parts = np.zeros(spec.m)
    for j, members in enumerate(categories.members):
        s = 0.0
        for i in idx:
            if i in members:
                s += W[i, j]
        parts[j] = float(spec.curves[j](s))
    return parts


def web_search_objective(priors: Sequence[float], relevance) -> ObjectiveSpec:
    """Diversified-search objective ``sum_j P(j) (1 - prod_i (1 - P(i|j)))``.

    ``relevance[i, j]`` is the probability that result ``i`` satisfies a
    user whose intent is category ``j``. Probability 1 is clamped.
    """
    rel = np.asarray(relevance, dtype=float)
    if np.any((rel < 0) | (rel > 1)):
        raise InputError("relevance probabilities must lie in [0, 1]")
    W = -np.log(np.maximum(1.0 - rel, CLAMP_EPS))
    W[rel == 0] = 0.0
    return ObjectiveSpec([NegExpCoverage(p) for p in priors], W)


def check_curve_shape(curve: ConcaveCurve, grid=None) -> tuple[bool, bool]:
    """Grid check of (increasing, concave)."""
    if grid is None:
        grid = np.concatenate([np.linspace(0, 5, 201), np.geomspace(5, 1e6, 200)])
    grid = np.sort(np.asarray(grid, dtype=float))
    vals = curve(grid)
    increasing = bool(np.all(np.diff(vals) >= -1e-12 * np.maximum(1, np.abs(vals[1:]))))
    a, b = grid[:-1], grid[1:]
    mid = curve((a + b) / 2)
    avg = (curve(a) + curve(b)) / 2
    concave = bool(np.all(mid >= avg - 1e-12 * np.maximum(1, np.abs(mid))))
    return increasing, concave


def read_utilities_csv(path) -> UtilityMatrix:
    """Read ``item,a1,...,am`` rows; rows are placed by their item index."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise InputError(f"{path}: empty utilities file") from None
        if not header or header[0].strip() != "item" or len(header) < 2:
            raise InputError(f"{path}: expected header 'item,a1,...,am', got {header}")
        rows = {}
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise InputError(f"{path}:{line_no}: expected {len(header)} fields")
            try:
                rows[int(row[0])] = [float(x) for x in row[1:]]
            except ValueError as exc:
                raise InputError(f"{path}:{line_no}: {exc}") from exc
    n = len(rows)
    if sorted(rows) != list(range(n)):
        raise InputError(f"{path}: item ids must be exactly 0..{n - 1}")
    return UtilityMatrix([rows[i] for i in range(n)])


def write_utilities_csv(path, utilities) -> None:
    W = as_matrix(utilities)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["item"] + [f"a{j + 1}" for j in range(W.shape[1])])
        for i, row in enumerate(W):
            w.writerow([i] + [repr(float(x)) for x in row])


def curves_from_config(cfg: dict, m: int | None = None) -> list[ConcaveCurve]:
    """Collect ``curve.<j>`` keys (1-based) into a list of curves."""
    found = {}
    for key, val in cfg.items():
        if key.startswith("curve."):
            try:
                j = int(key.split(".", 1)[1])
            except ValueError:
                raise InputError(f"bad curve key {key!r}") from None
            found[j] = ConcaveCurve.parse(val)
    if not found:
        raise InputError("no curve.<j> entries in config")
    count = m if m is not None else max(found)
    if sorted(found) != list(range(1, count + 1)):
        raise InputError(f"curve keys must cover curve.1 .. curve.{count}")
    return [found[j] for j in range(1, count + 1)]


def load_objective(utilities_path, config_path) -> ObjectiveSpec:
    from .config import read_config

    W = read_utilities_csv(utilities_path)
    curves = curves_from_config(read_config(config_path), W.m)
    return ObjectiveSpec(curves, W)


__all__ = [
    "ConcaveCurve", "Linear", "Sqrt", "ScaledSqrt", "Log1p", "WeightedLog1p",
    "CubeRoot", "NegExpCoverage", "UtilityMatrix", "ObjectiveSpec",
    "eval_objective", "marginal_gain", "decompose_by_category",
    "web_search_objective", "check_curve_shape", "read_utilities_csv",
    "write_utilities_csv", "curves_from_config", "load_objective",
]
