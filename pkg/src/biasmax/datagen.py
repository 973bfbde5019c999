"""Synthetic datasets and adversarial two-group instances."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .bias import BiasSpec, Identity, Multiplicative, apply_bias
from .errors import InputError, SizeError
from .groups import (CategoryStructure, GroupStructure, categories_from_support, make_rng,
                     sample_groups, split_sizes)
from .objective import CubeRoot, Linear, Log1p, ObjectiveSpec, ScaledSqrt, UtilityMatrix

PARETO_SCALE = 1000.0
EMERGING_CAP = 2.0

STREAM_DATA = 0
STREAM_GROUPS = 1


class SyntheticData(NamedTuple):
    latent: UtilityMatrix
    groups: GroupStructure
    categories: CategoryStructure
    latent_spec: ObjectiveSpec
    observed_spec: ObjectiveSpec
    bias: BiasSpec
    info: dict


@dataclass(frozen=True)
class SyntheticParams1:
    """Parameters of the artist-recommendation dataset."""

    delta: float = 2.0
    beta: float = 1.0
    g1_fraction: float = 0.5
    n: int = 250
    k: int = 50
    lam: float = 1 / 20
    emerging_fraction: float = 0.8
    p_nh: float = 0.9

    def __post_init__(self):
        for name in ("beta", "g1_fraction", "emerging_fraction", "p_nh"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise InputError(f"{name} must lie in [0, 1]")
        if not self.delta > 0:
            raise InputError("delta must be positive")
        if not self.lam > 0:
            raise InputError("lam must be positive")
        if self.n < 1 or not 1 <= self.k <= self.n:
            raise InputError("need 1 <= k <= n")


def pareto(rng: np.random.Generator, shape: float, size: int) -> np.ndarray:
    """Pareto type I draws with minimum 1 and tail index ``shape``."""
    return rng.pareto(shape, size) + 1.0


def truncated_pareto(rng: np.random.Generator, shape: float, size: int, upper: float) -> np.ndarray:
    """Pareto draws conditioned on ``X <= upper``, by rejection."""
    out = pareto(rng, shape, size)
    bad = np.flatnonzero(out > upper)
    while bad.size:
        out[bad] = pareto(rng, shape, bad.size)
        bad = bad[out[bad] > upper]
    return out


def _two_groups(n: int, g1_fraction: float, seed: int) -> GroupStructure:
    return sample_groups(n, split_sizes(n, [g1_fraction, 1 - g1_fraction]), make_rng(seed, STREAM_GROUPS))


def gen_synthetic1(params: SyntheticParams1, seed: int) -> SyntheticData:
    """Artists with a popularity score, an emerging flag and a genre flag.

    Attribute 1 is ``1000 * Pareto(delta)`` (capped at 2000 for emerging
    artists), attribute 2 marks the emerging artists, attribute 3 is a
    Bernoulli(p_nh) indicator. Only attribute 1 is biased, by ``beta`` on
    the second group.
    """
    p = params
    rng = make_rng(seed, STREAM_DATA)
    n = p.n
    emerging = np.zeros(n, dtype=bool)
    emerging[rng.permutation(n)[: int(math.floor(p.emerging_fraction * n))]] = True
    W = np.zeros((n, 3))
    established = np.flatnonzero(~emerging)
    rising = np.flatnonzero(emerging)
    W[established, 0] = PARETO_SCALE * pareto(rng, p.delta, established.size)
    W[rising, 0] = PARETO_SCALE * truncated_pareto(rng, p.delta, rising.size, EMERGING_CAP)
    W[:, 1] = emerging
    W[:, 2] = rng.random(n) < p.p_nh
    latent = UtilityMatrix(W)
    groups = _two_groups(n, p.g1_fraction, seed)
    bias = BiasSpec({0: Identity, 1: Identity, (1, 0): Multiplicative(p.beta)})
    curves = [Linear, ScaledSqrt(p.lam), ScaledSqrt(p.lam)]
    observed = apply_bias(latent, groups, bias)
    info = {"dataset": "synthetic1", "seed": seed, "n": n, "k": p.k, "delta": p.delta,
            "beta": p.beta, "g1_fraction": p.g1_fraction, "lam": p.lam,
            "emerging_fraction": p.emerging_fraction, "p_nh": p.p_nh,
            "pareto": "type I, minimum 1, scale 1000", "bias_scope": "attribute 1 only",
            "emerging": emerging}
    return SyntheticData(latent, groups, categories_from_support(latent), ObjectiveSpec(curves, latent),
                         ObjectiveSpec(curves, observed), bias, info)


def gen_synthetic2(n: int, delta: float, g1_fraction: float, beta: float, seed: int) -> SyntheticData:
    """Items in three disjoint categories with Pareto utilities and log curves.

    Every attribute of every second-group item is scaled by ``beta``.
    """
    if n < 1:
        raise InputError("n must be positive")
    if not delta > 0:
        raise InputError("delta must be positive")
    if not 0.0 <= beta <= 1.0 or not 0.0 <= g1_fraction <= 1.0:
        raise InputError("beta and g1_fraction must lie in [0, 1]")
    rng = make_rng(seed, STREAM_DATA)
    labels = rng.integers(0, 3, n)
    W = np.zeros((n, 3))
    W[np.arange(n), labels] = PARETO_SCALE * pareto(rng, delta, n)
    latent = UtilityMatrix(W)
    groups = _two_groups(n, g1_fraction, seed)
    bias = BiasSpec.multiplicative([1.0, beta])
    curves = [Log1p] * 3
    observed = apply_bias(latent, groups, bias)
    info = {"dataset": "synthetic2", "seed": seed, "n": n, "delta": delta, "beta": beta,
            "g1_fraction": g1_fraction, "pareto": "type I, minimum 1, scale 1000"}
    return SyntheticData(latent, groups, CategoryStructure.from_labels(labels, 3),
                         ObjectiveSpec(curves, latent), ObjectiveSpec(curves, observed), bias, info)


@dataclass(frozen=True)
class NegativeInstance:
    """A two-group instance on which representation constraints fail.

    ``observed(groups)`` applies the multiplicative bias pair for a given
    draw of the groups; ``sample_groups(rng)`` draws one with sizes
    ``(round(gamma_1 n), n - round(gamma_1 n))``.
    """

    case: str
    eps: float
    k: int
    n: int
    latent: UtilityMatrix
    gamma: tuple
    beta: tuple
    curves: tuple
    opt: float

    @property
    def latent_spec(self) -> ObjectiveSpec:
        return ObjectiveSpec(list(self.curves), self.latent)

    @property
    def bias(self) -> BiasSpec:
        return BiasSpec.multiplicative(self.beta)

    @property
    def group_sizes(self) -> tuple:
        g1 = int(round(self.gamma[0] * self.n))
        return g1, self.n - g1

    def sample_groups(self, rng) -> GroupStructure:
        return sample_groups(self.n, self.group_sizes, rng)

    def observed(self, groups: GroupStructure) -> np.ndarray:
        out = apply_bias(self.latent, groups, self.bias).values
        if self.case in ("A", "B") and groups.sizes.min() > 0:
            col = out[:, 0]
            g1 = groups.assignment == 0
            if not col[g1].min() > col[~g1].max():
                raise AssertionError("first-group observed utilities must dominate")
        return out


def _two_type_opt(k: int, n_a: int, n_b: int, curve_a, curve_b) -> float:
    a = np.arange(0, min(k, n_a) + 1)
    b = np.minimum(k - a, n_b)
    return float(np.max(curve_a(a.astype(float)) + curve_b(b.astype(float))))


def negative_minima(case: str, eps: float, k: int) -> dict:
    """Smallest admissible ``k`` and ``n`` for a case at desk scale."""
    if case in ("A", "B"):
        return {"k": math.ceil(math.log(1 / eps) / (2 * eps * eps)), "n": math.ceil(2 * k / eps)}
    if case == "C":
        return {"k": 1, "n": 2 * k}
    if case == "D":
        return {"k": 1, "n": k + 1}
    raise InputError(f"unknown case {case!r}; expected A, B, C or D")


def gen_negative(case: str, eps: float, k: int, n: int, beta2: float | None = None) -> NegativeInstance:
    """Build one of the four adversarial constructions.

    A and B use a single linear attribute with the first ``k`` items worth
    1 and the rest ``eps``; the second group is shrunk by ``eps**2``.
    C and D use two item types and a cube-root plus scaled square-root
    objective; ``beta2`` defaults to ``eps``.
    """
    case = str(case).upper()
    if not 0 < eps < 1:
        raise InputError("eps must lie in (0, 1)")
    req = negative_minima(case, eps, k)
    gamma1 = {"A": eps, "B": 1 - eps, "C": eps**4, "D": eps**3}[case]
    if k < req["k"] or n < req["n"] or round(gamma1 * n) < 1 or round(gamma1 * n) >= n:
        raise SizeError(
            f"case {case} with eps={eps:g} needs k >= {req['k']}, n >= {req['n']} and both "
            f"groups nonempty (|G1| = round({gamma1:g} * n)); got k={k}, n={n}")
    gamma = (gamma1, 1 - gamma1)
    if case in ("A", "B"):
        W = np.full((n, 1), eps)
        W[:k] = 1.0
        return NegativeInstance(case, eps, k, n, UtilityMatrix(W), gamma, (1.0, eps * eps),
                                (Linear,), float(k))
    b2 = eps if beta2 is None else float(beta2)
    if not b2 > 0:
        raise InputError("beta2 must be positive")
    n_a = n // 2 if case == "C" else k
    W = np.zeros((n, 2))
    W[:n_a, 0] = 1.0
    W[n_a:, 1] = 1.0
    weight = eps if case == "C" else eps**3
    curves = (CubeRoot, ScaledSqrt(weight))
    opt = _two_type_opt(k, n_a, n - n_a, curves[0], curves[1])
    return NegativeInstance(case, eps, k, n, UtilityMatrix(W), gamma, (1.0, b2), curves, opt)
