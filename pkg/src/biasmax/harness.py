"""Experiment orchestration: sweeps, normalized latent utility, adversarial demos."""

from __future__ import annotations

import csv
import io
import math
import os
from dataclasses import dataclass, field
from itertools import product
from typing import Iterable, Optional, Sequence

import numpy as np

from .config import floats, read_config
from .datagen import SyntheticParams1, gen_negative, gen_synthetic1, gen_synthetic2
from .debias import algorithm1
from .errors import BiasmaxError, FormatError, InputError, UndefinedNLUError
from .groups import FairnessConstraint, fairness_caps, make_rng
from .maximizers import (CapFeasibility, SelectionResult, exhaustive_opt, greedy_cardinality,
                         greedy_with_caps, materialize_counts, two_type_counts)
from .objective import ObjectiveSpec, eval_objective

ALGORITHMS = ("Uncons", "ProportionalRepr", "Algorithm1")
DATASETS = ("synthetic1", "synthetic2")
RECORD_FIELDS = ("dataset", "beta", "frac_g1", "delta", "algo", "seed", "k",
                 "latent", "observed", "nlu", "flags")
AGGREGATE_FIELDS = ("dataset", "beta", "frac_g1", "delta", "algo", "trials",
                    "mean_nlu", "sem_nlu", "mean_latent", "sem_latent")
SEED_ENV = "BIASMAX_SEED"
NEGATIVE_THRESHOLDS = {"A": 3.0, "B": 4.0, "C": 3.0, "D": 3.0}


def normalized_latent_utility(latent_spec: ObjectiveSpec, subset, reference_subset=None,
                              k: Optional[int] = None) -> float:
    """``F(subset) / F(reference)``.

    The reference defaults to the greedy selection of ``k`` items (default
    ``|subset|``) on the latent utilities.
    """
    subset = list(subset)
    if reference_subset is None:
        reference_subset = greedy_cardinality(latent_spec, k or max(len(subset), 1)).order
    ref = eval_objective(latent_spec, reference_subset)
    if not ref > 0:
        raise UndefinedNLUError("reference selection has zero latent value")
    return eval_objective(latent_spec, subset) / ref


def seed_base_from_env(default: int) -> int:
    raw = os.environ.get(SEED_ENV)
    if raw is None or raw.strip() == "":
        return int(default)
    try:
        value = int(raw)
    except ValueError:
        raise InputError(f"{SEED_ENV} must be an integer, got {raw!r}") from None
    if value < 0:
        raise InputError(f"{SEED_ENV} must be nonnegative")
    return value


def trial_seed(base: int, cell: int, trial: int) -> int:
    """Deterministic 63-bit seed for one (cell, trial) pair."""
    state = np.random.SeedSequence(int(base), spawn_key=(int(cell), int(trial))).generate_state(2, np.uint64)
    return int(state[0]) & ((1 << 63) - 1)


@dataclass(frozen=True)
class SweepConfig:
    """A grid of (delta, group fraction, beta) cells, each run ``trials`` times.

    Config file keys: ``dataset``, ``betas``, ``fractions``, ``deltas``,
    ``trials``, ``algorithms``, ``seed``, ``n``, ``k``.
    """

    betas: tuple = (0.001, 0.01, 0.1, 0.5, 1.0)
    fractions: tuple = (0.5,)
    deltas: tuple = (2.0,)
    trials: int = 50
    algorithms: tuple = ALGORITHMS
    seed: int = 0
    dataset: str = "synthetic2"
    n: int = 250
    k: int = 50

    def __post_init__(self):
        object.__setattr__(self, "betas", tuple(float(b) for b in self.betas))
        object.__setattr__(self, "fractions", tuple(float(f) for f in self.fractions))
        object.__setattr__(self, "deltas", tuple(float(d) for d in self.deltas))
        object.__setattr__(self, "algorithms", tuple(self.algorithms))
        if self.trials < 1:
            raise InputError("trials must be at least 1")
        if any(not 0.0 <= b <= 1.0 for b in self.betas):
            raise InputError("betas must lie in [0, 1]")
        if any(not 0.0 < f <= 1.0 for f in self.fractions):
            raise InputError("group fractions must lie in (0, 1]")
        if any(not d > 0 for d in self.deltas):
            raise InputError("deltas must be positive")
        unknown = set(self.algorithms) - set(ALGORITHMS)
        if unknown or not self.algorithms:
            raise InputError(f"algorithms must be a nonempty subset of {ALGORITHMS}")
        if self.dataset not in DATASETS:
            raise InputError(f"dataset must be one of {DATASETS}")
        if not 1 <= self.k <= self.n:
            raise InputError("need 1 <= k <= n")
        if self.seed < 0:
            raise InputError("seed must be nonnegative")

    @classmethod
    def from_config(cls, cfg: dict) -> "SweepConfig":
        kw = {}
        try:
            for key in ("betas", "fractions", "deltas"):
                if key in cfg:
                    kw[key] = floats(cfg[key])
            for key in ("trials", "seed", "n", "k"):
                if key in cfg:
                    kw[key] = int(cfg[key])
        except ValueError as exc:
            raise InputError(f"bad sweep config value: {exc}") from None
        if "algorithms" in cfg:
            kw["algorithms"] = [a.strip() for a in cfg["algorithms"].split(",") if a.strip()]
        if "dataset" in cfg:
            kw["dataset"] = cfg["dataset"].strip()
        return cls(**kw)

    @classmethod
    def from_file(cls, path) -> "SweepConfig":
        return cls.from_config(read_config(path))


@dataclass
class TrialRecord:
    dataset: str
    beta: float
    frac_g1: float
    delta: float
    algo: str
    seed: int
    k: int
    latent: float
    observed: float
    nlu: float
    group_counts: tuple = ()
    flags: frozenset = field(default_factory=frozenset)

    def row(self) -> list[str]:
        return [self.dataset, _fmt(self.beta), _fmt(self.frac_g1), _fmt(self.delta), self.algo,
                str(self.seed), str(self.k), _fmt(self.latent), _fmt(self.observed), _fmt(self.nlu),
                ";".join(sorted(self.flags))]


def _fmt(x) -> str:
    return "%.10g" % x


def _generate(cfg: SweepConfig, delta: float, frac: float, beta: float, seed: int):
    if cfg.dataset == "synthetic1":
        return gen_synthetic1(SyntheticParams1(delta=delta, beta=beta, g1_fraction=frac, n=cfg.n, k=cfg.k), seed)
    return gen_synthetic2(cfg.n, delta, frac, beta, seed)


def run_algorithm(algo: str, observed: ObjectiveSpec, k: int, groups, categories) -> SelectionResult:
    """Dispatch on the algorithm name; only observed data goes in."""
    if algo == "Uncons":
        return greedy_cardinality(observed, k)
    if algo == "ProportionalRepr":
        caps = fairness_caps(FairnessConstraint.proportional(groups.p), groups, k)
        return greedy_with_caps(observed, k, groups, caps)
    if algo == "Algorithm1":
        return algorithm1(observed.W, k, groups, categories, observed.curves)
    raise InputError(f"unknown algorithm {algo!r}")


def run_sweep(cfg: SweepConfig) -> list[TrialRecord]:
    """Every (delta, fraction, beta, algorithm, trial) combination, in that order.

    Data for a trial depends on (delta, fraction, trial) only, so all betas
    and algorithms of a trial see the same latent utilities and groups.
    """
    records = []
    for cell, (delta, frac) in enumerate(product(cfg.deltas, cfg.fractions)):
        for beta in cfg.betas:
            per_algo = {a: [] for a in cfg.algorithms}
            for trial in range(cfg.trials):
                seed = trial_seed(cfg.seed, cell, trial)
                data = _generate(cfg, delta, frac, beta, seed)
                reference = greedy_cardinality(data.latent_spec, cfg.k)
                for algo in cfg.algorithms:
                    per_algo[algo].append(_one_trial(cfg, algo, data, reference, beta, frac, delta, seed))
            for algo in cfg.algorithms:
                records.extend(per_algo[algo])
    return records


def _one_trial(cfg, algo, data, reference, beta, frac, delta, seed) -> TrialRecord:
    flags = set()
    try:
        res = run_algorithm(algo, data.observed_spec, cfg.k, data.groups, data.categories)
    except BiasmaxError as exc:
        flags.add(f"error:{type(exc).__name__}")
        nan = float("nan")
        return TrialRecord(cfg.dataset, beta, frac, delta, algo, seed, cfg.k, nan, nan, nan,
                           (), frozenset(flags))
    latent = eval_objective(data.latent_spec, res.order)
    flags |= res.flags
    try:
        nlu = normalized_latent_utility(data.latent_spec, res.order, reference.order)
    except UndefinedNLUError:
        nlu = float("nan")
        flags.add("nlu_undefined")
    counts = tuple(int(c) for c in data.groups.counts(res.order))
    return TrialRecord(cfg.dataset, beta, frac, delta, algo, seed, cfg.k, latent,
                       res.observed_value, nlu, counts, frozenset(flags))


def records_csv(records: Iterable[TrialRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RECORD_FIELDS)
    for r in records:
        w.writerow(r.row())
    return buf.getvalue()


def write_records_csv(path, records) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(records_csv(records))


def read_records_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != RECORD_FIELDS:
            raise FormatError(f"{path}: expected header {','.join(RECORD_FIELDS)}")
        return list(reader)


def _mean_sem(values: Sequence[float]) -> tuple[float, float]:
    arr = np.asarray([v for v in values if not math.isnan(v)], dtype=float)
    if arr.size == 0:
        return float("nan"), float("nan")
    if arr.size == 1:
        return float(arr[0]), float("nan")
    return float(arr.mean()), float(arr.std(ddof=1) / math.sqrt(arr.size))


def aggregate(records: Iterable[TrialRecord]) -> list[dict]:
    """Mean and standard error (sample sd / sqrt(trials)) per cell and algorithm."""
    cells: dict = {}
    for r in records:
        cells.setdefault((r.dataset, r.beta, r.frac_g1, r.delta, r.algo), []).append(r)
    out = []
    for key, rows in cells.items():
        mean_nlu, sem_nlu = _mean_sem([r.nlu for r in rows])
        mean_lat, sem_lat = _mean_sem([r.latent for r in rows])
        out.append(dict(zip(AGGREGATE_FIELDS, key + (len(rows), mean_nlu, sem_nlu, mean_lat, sem_lat))))
    return out


def aggregate_csv(rows: Iterable[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(AGGREGATE_FIELDS)
    for row in rows:
        w.writerow([row[f] if isinstance(row[f], (str, int)) else _fmt(row[f]) for f in AGGREGATE_FIELDS])
    return buf.getvalue()


@dataclass
class NegativeReport:
    case: str
    eps: float
    k: int
    n: int
    threshold: float
    certifying: bool
    opt: float
    seeds: list
    counts: list
    values: list
    ratios: list

    @property
    def frequency(self) -> float:
        """Fraction of trials with ``F(S_UV) / OPT <= threshold``."""
        return float(np.mean(np.asarray(self.ratios) <= self.threshold + 1e-12))

    def csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["case", "eps", "k", "n", "trial", "seed", "a1", "a2", "b1", "b2",
                    "latent", "opt", "ratio", "below"])
        for t, (seed, c, v, r) in enumerate(zip(self.seeds, self.counts, self.values, self.ratios)):
            w.writerow([self.case, _fmt(self.eps), self.k, self.n, t, seed, *c, _fmt(v), _fmt(self.opt),
                        _fmt(r), int(r <= self.threshold + 1e-12)])
        return buf.getvalue()


def run_negative_demo(case: str, eps: float, k: int, n: int, constraint: FairnessConstraint,
                      trials: int, seed: int = 0, beta2: Optional[float] = None) -> NegativeReport:
    """Resample groups ``trials`` times and compute the exact constrained
    observed-utility maximizer each time.

    Cases A and B run at their proven scale; C and D cannot reach theirs at
    desk scale and are reported as non-certifying.
    """
    if trials < 1:
        raise InputError("trials must be at least 1")
    inst = gen_negative(case, eps, k, n, beta2)
    if constraint.p != 2:
        raise InputError("adversarial instances have two groups")
    seeds, counts, values, ratios = [], [], [], []
    for t in range(trials):
        s = trial_seed(seed, 0, t)
        groups = inst.sample_groups(make_rng(s))
        caps = fairness_caps(constraint, groups, k)
        observed = inst.observed(groups)
        c = two_type_counts(inst.latent_spec, observed, groups, caps, k)
        subset = materialize_counts(inst.latent.values, observed, groups, c)
        value = eval_objective(inst.latent_spec, subset)
        seeds.append(s)
        counts.append(c)
        values.append(value)
        ratios.append(value / inst.opt)
    threshold = NEGATIVE_THRESHOLDS[inst.case] * eps
    return NegativeReport(inst.case, eps, k, n, threshold, inst.case in ("A", "B"), inst.opt,
                          seeds, counts, values, ratios)


def exhaustive_uv(inst, groups, caps, k: int):
    """Observed-utility maximizer by brute force, for cross-checking small instances."""
    observed = ObjectiveSpec(list(inst.curves), inst.observed(groups))
    subset, _ = exhaustive_opt(observed, k, CapFeasibility(groups, caps))
    return subset, eval_objective(observed, subset)
