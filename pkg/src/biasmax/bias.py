"""Group-dependent bias transforms from latent to observed utilities."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import ConfigurationError, InputError
from .groups import GroupStructure
from .objective import UtilityMatrix, as_matrix

BIAS_KINDS = ("identity", "multiplicative", "affine_skew", "tfidf_skew", "table", "composed")


@dataclass(frozen=True)
class BiasFunction:
    """An increasing map ``R>=0 -> R>=0``.

    Kinds:

    * ``identity``
    * ``multiplicative``: ``beta * z``
    * ``affine_skew``: ``z * (1 - x) + x``, a fraction ``x`` of raters
      pinning the score to 1
    * ``tfidf_skew``: ``h * z``
    * ``table``: piecewise-linear through strictly increasing breakpoints,
      extended linearly past both ends and clipped at 0
    * ``composed``: ``outer(inner(z))``
    """

    kind: str = "identity"
    param: float = 1.0
    xs: tuple = ()
    ys: tuple = ()
    parts: tuple = ()

    def __post_init__(self):
        if self.kind not in BIAS_KINDS:
            raise InputError(f"unknown bias kind {self.kind!r}")
        if self.kind == "multiplicative" and not self.param >= 0:
            raise InputError("multiplicative bias needs beta >= 0")
        if self.kind == "affine_skew" and not 0 <= self.param <= 1:
            raise InputError("affine skew fraction must lie in [0, 1]")
        if self.kind == "tfidf_skew" and not self.param > 0:
            raise InputError("tf-idf skew needs a positive h-value")
        if self.kind == "table":
            xs = np.asarray(self.xs, dtype=float)
            ys = np.asarray(self.ys, dtype=float)
            if xs.size < 2 or xs.size != ys.size:
                raise InputError("table bias needs at least two (x, y) breakpoints")
            if np.any(np.diff(xs) <= 0) or np.any(np.diff(ys) <= 0):
                raise InputError("table breakpoints must be strictly increasing")
            if np.any(ys < 0):
                raise InputError("table values must be nonnegative")

    def __call__(self, z):
        z = np.asarray(z, dtype=float)
        k = self.kind
        if k == "identity":
            return z.copy()
        if k in ("multiplicative", "tfidf_skew"):
            return self.param * z
        if k == "affine_skew":
            return z * (1.0 - self.param) + self.param
        if k == "composed":
            out = z
            for f in reversed(self.parts):
                out = f(out)
            return out
        xs = np.asarray(self.xs)
        ys = np.asarray(self.ys)
        out = np.interp(z, xs, ys)
        lo_slope = (ys[1] - ys[0]) / (xs[1] - xs[0])
        hi_slope = (ys[-1] - ys[-2]) / (xs[-1] - xs[-2])
        out = np.where(z < xs[0], ys[0] + (z - xs[0]) * lo_slope, out)
        out = np.where(z > xs[-1], ys[-1] + (z - xs[-1]) * hi_slope, out)
        return np.maximum(out, 0.0)

    @property
    def is_identity(self) -> bool:
        if self.kind == "identity":
            return True
        if self.kind in ("multiplicative", "tfidf_skew"):
            return self.param == 1.0
        if self.kind == "affine_skew":
            return self.param == 0.0
        if self.kind == "composed":
            return all(f.is_identity for f in self.parts)
        return False

    def compose(self, inner: "BiasFunction") -> "BiasFunction":
        """``self o inner``."""
        if inner.kind == "identity":
            return self
        if self.kind == "identity":
            return inner
        outer = self.parts if self.kind == "composed" else (self,)
        tail = inner.parts if inner.kind == "composed" else (inner,)
        return BiasFunction("composed", parts=outer + tail)

    def __str__(self):
        if self.kind == "identity":
            return "identity"
        if self.kind == "table":
            pts = ";".join(f"{x:g}/{y:g}" for x, y in zip(self.xs, self.ys))
            return f"table:{pts}"
        if self.kind == "composed":
            return "(" + " o ".join(str(f) for f in self.parts) + ")"
        return f"{self.kind}:{self.param:g}"

    @classmethod
    def parse(cls, text: str) -> "BiasFunction":
        """``identity``, ``multiplicative:0.01``, ``affine_skew:0.25``,
        ``tfidf_skew:0.8`` or ``table:0/0;1/0.5;2/3``."""
        kind, _, arg = text.strip().partition(":")
        kind = kind.strip().lower()
        try:
            if kind == "identity":
                return Identity
            if kind == "table":
                pts = [p.split("/") for p in arg.split(";") if p.strip()]
                return Table([float(a) for a, _ in pts], [float(b) for _, b in pts])
            if kind in ("multiplicative", "affine_skew", "tfidf_skew"):
                return cls(kind, float(arg))
        except ValueError as exc:
            raise InputError(f"bad bias spec {text!r}") from exc
        raise InputError(f"unknown bias kind {kind!r}")


Identity = BiasFunction("identity")


def Multiplicative(beta: float) -> BiasFunction:
    return BiasFunction("multiplicative", beta)


def AffineSkew(x: float) -> BiasFunction:
    return BiasFunction("affine_skew", x)


def TfIdfSkew(h: float) -> BiasFunction:
    return BiasFunction("tfidf_skew", h)


def Table(xs: Sequence[float], ys: Sequence[float]) -> BiasFunction:
    return BiasFunction("table", xs=tuple(float(x) for x in xs), ys=tuple(float(y) for y in ys))


class BiasSpec:
    """Per-group (and optionally per-group-per-attribute) transforms.

    ``table`` maps a group id to a :class:`BiasFunction` and/or a
    ``(group, attribute)`` pair to one; the pair entry wins when both exist.
    """

    def __init__(self, table: Mapping):
        self.table = dict(table)
        for key, f in self.table.items():
            if not isinstance(f, BiasFunction):
                raise InputError(f"bias for {key!r} is not a BiasFunction")

    @classmethod
    def multiplicative(cls, betas: Sequence[float]) -> "BiasSpec":
        return cls({g: (Identity if b == 1.0 else Multiplicative(b)) for g, b in enumerate(betas)})

    @classmethod
    def identity(cls, p: int) -> "BiasSpec":
        return cls({g: Identity for g in range(p)})

    @property
    def extended(self) -> bool:
        return any(isinstance(k, tuple) for k in self.table)

    def lookup(self, group: int, attribute: int) -> BiasFunction:
        f = self.table.get((group, attribute))
        if f is None:
            f = self.table.get(group)
        if f is None:
            raise ConfigurationError(
                f"no bias transform for group {group} (attribute {attribute})")
        return f

    def reference_is_identity(self, m: int, group: int = 0) -> bool:
        return all(self.lookup(group, j).is_identity for j in range(m))

    def __eq__(self, other):
        if not isinstance(other, BiasSpec):
            return NotImplemented
        return self.table == other.table

    def __repr__(self):
        return f"BiasSpec({ {k: str(v) for k, v in self.table.items()} })"

    @classmethod
    def from_config(cls, cfg: dict) -> "BiasSpec":
        """Keys ``bias.<group>`` and ``bias.<group>.<attr>``, 1-based."""
        table = {}
        for key, val in cfg.items():
            if not key.startswith("bias."):
                continue
            parts = key.split(".")[1:]
            try:
                ids = [int(x) - 1 for x in parts]
            except ValueError:
                raise InputError(f"bad bias key {key!r}") from None
            if len(ids) == 1:
                table[ids[0]] = BiasFunction.parse(val)
            elif len(ids) == 2:
                table[(ids[0], ids[1])] = BiasFunction.parse(val)
            else:
                raise InputError(f"bad bias key {key!r}")
        return cls(table)

    def to_config(self) -> dict[str, str]:
        out = {}
        for key, f in self.table.items():
            name = f"bias.{key + 1}" if isinstance(key, int) else f"bias.{key[0] + 1}.{key[1] + 1}"
            out[name] = str(f)
        return out


def apply_bias(latent, groups: GroupStructure, bias: BiasSpec) -> UtilityMatrix:
    """Observed utilities ``W_hat[i, j] = phi_{group(i), j}(W[i, j])``."""
    W = as_matrix(latent)
    if groups.n != W.shape[0]:
        raise InputError(f"partition covers {groups.n} items, matrix has {W.shape[0]}")
    out = np.empty_like(W, dtype=float)
    for g in range(groups.p):
        rows = groups.members(g)
        if rows.size == 0:
            continue
        for j in range(W.shape[1]):
            out[rows, j] = bias.lookup(g, j)(W[rows, j])
    return UtilityMatrix(out)


def reduce_overlapping_groups(memberships: Sequence, bias: BiasSpec, m: int | None = None):
    """Turn overlapping groups into disjoint intersections.

    ``memberships[i]`` is the set of raw group ids containing item ``i``.
    Items with the same membership set share one intersection group whose
    transform composes the members' transforms (lowest raw id outermost);
    the empty membership gets the identity. Intersection groups are ordered
    by their sorted membership tuple, so singleton-only input keeps its ids.

    The returned partition's ``labels[g]`` is the membership tuple of
    intersection group ``g``.
    """
    sets = [tuple(sorted(set(int(g) for g in s))) for s in memberships]
    raw = sorted({g for s in sets for g in s})
    if len(raw) > 20:
        raise InputError("at most 20 raw groups are supported")
    keys = sorted(set(sets), key=lambda t: (len(t) == 0, t))
    index = {key: g for g, key in enumerate(keys)}
    groups = GroupStructure([index[s] for s in sets], len(keys), labels=keys)

    attrs = sorted({k[1] for k in bias.table if isinstance(k, tuple)})
    if attrs and m is None:
        m = max(attrs) + 1
    table = {}
    for key, g in index.items():
        if not attrs:
            f = Identity
            for r in reversed(key):
                f = bias.lookup(r, 0).compose(f)
            table[g] = f
        else:
            for j in range(m):
                f = Identity
                for r in reversed(key):
                    f = bias.lookup(r, j).compose(f)
                table[(g, j)] = f
    return groups, BiasSpec(table)
