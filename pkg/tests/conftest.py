import itertools
from pathlib import Path

import numpy as np
import pytest

from biasmax.objective import ConcaveCurve

FIXTURES = Path(__file__).parent / "fixtures"
ML_FIXTURE = FIXTURES / "movielens"

CURVE_SAMPLES = [
    ConcaveCurve("linear"),
    ConcaveCurve("sqrt"),
    ConcaveCurve("scaled_sqrt", 0.05),
    ConcaveCurve("log1p"),
    ConcaveCurve("weighted_log1p", 2.5),
    ConcaveCurve("cube_root"),
    ConcaveCurve("negexp_coverage", 0.3),
]


def brute_value(curves, W, subset):
    """Objective value with plain Python sums, independent of the library."""
    total = 0.0
    for j, g in enumerate(curves):
        s = sum(float(W[i][j]) for i in subset)
        total += float(g(s))
    return total


def brute_opt(curves, W, k, ok=lambda s: True):
    """Best value over all subsets of size <= k passing ``ok``."""
    n = len(W)
    best = 0.0 if ok(()) else -np.inf
    for size in range(1, k + 1):
        for s in itertools.combinations(range(n), size):
            if ok(s):
                best = max(best, brute_value(curves, W, s))
    return best


def cap_ok(assignment, caps):
    def ok(s):
        counts = np.bincount(np.asarray(assignment)[list(s)], minlength=len(caps)) if s else np.zeros(len(caps))
        return bool(np.all(counts <= caps))
    return ok


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def part1_program_opt(W, curves, groups, categories, k):
    """Exhaustive optimum of the reference-group program.

    Maximize the rescaled objective over subsets of the reference group
    with at least min(ceil(sqrt k), |C_j & G_1|) items from every category
    and at most floor(k |G_1| / n) items overall.
    """
    from biasmax.maximizers import exhaustive_opt
    from biasmax.objective import ObjectiveSpec

    W = np.asarray(W, dtype=float)
    n = W.shape[0]
    ref = groups.members(0)
    sub = W[ref] * (n / ref.size)
    target = (k * ref.size) // n
    per = int(np.ceil(np.sqrt(k)))
    local_cat = np.full(ref.size, -1)
    for j, members in enumerate(categories.members):
        for pos, i in enumerate(ref):
            if int(i) in members:
                local_cat[pos] = j
    floors = [min(per, int(np.sum(local_cat == j))) for j in range(categories.m)]

    class Feas:
        def __call__(self, s):
            return self.batch(np.array([s], dtype=np.int64).reshape(1, -1))[0]

        def batch(self, combos):
            labels = local_cat[combos]
            ok = np.ones(combos.shape[0], dtype=bool)
            for j, f in enumerate(floors):
                ok &= (labels == j).sum(axis=1) >= f
            return ok

    _, value = exhaustive_opt(ObjectiveSpec(curves, sub), target, Feas())
    return value


ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
