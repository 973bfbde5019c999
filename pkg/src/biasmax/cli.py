"""Command-line entry point.

Exit codes: 0 success, 2 input or format error, 3 size or precondition error.
"""

from __future__ import annotations

import argparse
import csv
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import datagen, harness, movielens
from .config import format_config, read_config
from .errors import BiasmaxError, InputError
from .groups import (FairnessConstraint, categories_from_support, read_categories_csv,
                     read_groups_csv, write_categories_csv, write_groups_csv)
from .harness import ALGORITHMS, run_algorithm, seed_base_from_env
from .objective import (ObjectiveSpec, curves_from_config, eval_objective, read_utilities_csv,
                        write_utilities_csv)


def _seed(explicit, default: int = 0) -> int:
    """``--seed`` wins, then ``BIASMAX_SEED``, then the config/default value."""
    if explicit is not None:
        if explicit < 0:
            raise InputError("seed must be nonnegative")
        return explicit
    return seed_base_from_env(default)


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise InputError(f"expected comma-separated integers, got {text!r}") from None


def parse_constraint(text: str, p: int = 2) -> FairnessConstraint:
    """``proportional``, ``equal`` or ``u1,u2:v1,v2``."""
    t = text.strip().lower()
    if t == "proportional":
        return FairnessConstraint.proportional(p)
    if t == "equal":
        return FairnessConstraint.equal(p)
    u, sep, v = t.partition(":")
    if not sep:
        raise InputError(f"bad constraint {text!r}; use proportional, equal or u1,u2:v1,v2")
    try:
        return FairnessConstraint([float(x) for x in u.split(",")], [float(x) for x in v.split(",")])
    except ValueError:
        raise InputError(f"bad constraint {text!r}") from None


def cmd_gen(args) -> int:
    seed = _seed(args.seed)
    if args.dataset == "1":
        params = datagen.SyntheticParams1(delta=args.delta, beta=args.beta, g1_fraction=args.frac,
                                          n=args.n, k=args.k)
        data = datagen.gen_synthetic1(params, seed)
    else:
        data = datagen.gen_synthetic2(args.n, args.delta, args.frac, args.beta, seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_utilities_csv(out / "latent.csv", data.latent)
    write_utilities_csv(out / "observed.csv", data.observed_spec.utilities)
    write_groups_csv(out / "groups.csv", data.groups)
    write_categories_csv(out / "categories.csv", data.categories)
    curves = {f"curve.{j + 1}": str(c) for j, c in enumerate(data.latent_spec.curves)}
    (out / "objective.cfg").write_text(format_config(curves))
    info = {k: str(v) for k, v in data.info.items() if not isinstance(v, np.ndarray)}
    info.update(data.bias.to_config())
    info["k"] = str(args.k)
    (out / "manifest.cfg").write_text(format_config(info))
    print(f"wrote {out}")
    return 0


def cmd_select(args) -> int:
    observed = read_utilities_csv(args.utilities)
    curves = curves_from_config(read_config(args.objective), observed.m)
    spec = ObjectiveSpec(curves, observed)
    groups = read_groups_csv(args.groups, observed.n)
    if args.categories:
        cats = read_categories_csv(args.categories, observed.m)
    else:
        cats = categories_from_support(observed)
    res = run_algorithm(args.algo, spec, args.k, groups, cats)
    rows = []
    for step, i in enumerate(res.order):
        cat = res.category_of.get(i)
        if cat is None:
            found = cats.category_of(i)
            cat = found[0] if found else -1
        rows.append([i, cat, int(groups.assignment[i]), step])
    if args.out:
        with open(args.out, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["item", "category", "group", "step"])
            w.writerows(rows)
    summary = {"algo": args.algo, "k": args.k, "selected": len(res.order),
               "observed": "%.10g" % res.observed_value,
               "group_counts": ",".join(str(int(c)) for c in groups.counts(res.order)),
               "flags": ",".join(sorted(res.flags))}
    if res.budgets is not None:
        summary["budgets"] = ",".join(str(int(x)) for x in res.budgets.k)
    if args.latent:
        latent = read_utilities_csv(args.latent)
        summary["latent"] = "%.10g" % eval_objective(ObjectiveSpec(curves, latent), res.order)
    sys.stdout.write(format_config({k: str(v) for k, v in summary.items()}))
    return 0


def cmd_sweep(args) -> int:
    cfg_map = read_config(args.config)
    cfg = harness.SweepConfig.from_config(cfg_map)
    seed = _seed(args.seed, cfg.seed)
    if seed != cfg.seed:
        cfg = replace(cfg, seed=seed)
    records = harness.run_sweep(cfg)
    harness.write_records_csv(args.out, records)
    if args.aggregate:
        Path(args.aggregate).write_text(harness.aggregate_csv(harness.aggregate(records)))
    print(f"wrote {len(records)} rows to {args.out}")
    return 0


def cmd_negres(args) -> int:
    constraint = parse_constraint(args.constraint)
    report = harness.run_negative_demo(args.case, args.eps, args.k, args.n, constraint, args.trials,
                                       _seed(args.seed), args.beta2)
    if args.out:
        Path(args.out).write_text(report.csv())
    label = "certifying" if report.certifying else "non-certifying (desk scale below the proven minima)"
    print(f"case {report.case}: OPT={report.opt:.6g} threshold={report.threshold:.6g} "
          f"mean_ratio={np.mean(report.ratios):.6g} frequency_below={report.frequency:.4g} [{label}]")
    return 0


def cmd_ml_ingest(args) -> int:
    overrides = movielens.read_overrides(args.overrides) if args.overrides else None
    table = movielens.ingest_movielens(args.ratings, args.scores, args.tags, args.movies, args.labels,
                                       args.threshold, overrides, args.min_ratings)
    movielens.write_table(table, args.out)
    for row in movielens.genre_ratio_table(table):
        print(f"{row['genre']}\t{row['male_mean']:.4g}\t{row['nonmale_mean']:.4g}\t{row['ratio']:.4g}")
    print(f"{len(table)} movies; stereotypical: {','.join(movielens.stereotypical_genres(table))}")
    return 0


def cmd_ml_run(args) -> int:
    table = movielens.read_table(args.table)
    genres = [g.strip() for g in args.genres.split(",") if g.strip()]
    records = movielens.run_movielens_experiment(
        table, genres, _int_list(args.k), args.trials, _seed(args.seed), args.min_ratings,
        require_stereotypical=not args.any_genre)
    harness.write_records_csv(args.out, records)
    if args.aggregate:
        Path(args.aggregate).write_text(harness.aggregate_csv(harness.aggregate(records)))
    print(f"wrote {len(records)} rows to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="biasmax", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a synthetic dataset")
    g.add_argument("--dataset", choices=["1", "2"], default="2")
    g.add_argument("--n", type=int, default=250)
    g.add_argument("--k", type=int, default=50)
    g.add_argument("--delta", type=float, default=2.0)
    g.add_argument("--beta", type=float, default=1.0)
    g.add_argument("--frac", type=float, default=0.5, help="reference group fraction")
    g.add_argument("--seed", type=int)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen)

    s = sub.add_parser("select", help="run one algorithm on CSV inputs")
    s.add_argument("--utilities", required=True, help="observed utilities CSV")
    s.add_argument("--objective", required=True, help="config with curve.<j> keys")
    s.add_argument("--groups", required=True)
    s.add_argument("--categories")
    s.add_argument("--latent", help="latent utilities CSV, used only for scoring")
    s.add_argument("--k", type=int, required=True)
    s.add_argument("--algo", choices=ALGORITHMS, default="Algorithm1")
    s.add_argument("--out", help="selection CSV path")
    s.set_defaults(func=cmd_select)

    w = sub.add_parser("sweep", help="run a beta sweep from a config file")
    w.add_argument("config")
    w.add_argument("--out", required=True)
    w.add_argument("--aggregate")
    w.add_argument("--seed", type=int)
    w.set_defaults(func=cmd_sweep)

    n = sub.add_parser("negres", help="adversarial instance demo")
    n.add_argument("--case", choices=list("ABCD"), required=True)
    n.add_argument("--eps", type=float, required=True)
    n.add_argument("--k", type=int, required=True)
    n.add_argument("--n", type=int, required=True)
    n.add_argument("--constraint", default="proportional")
    n.add_argument("--trials", type=int, default=100)
    n.add_argument("--beta2", type=float)
    n.add_argument("--seed", type=int)
    n.add_argument("--out")
    n.set_defaults(func=cmd_negres)

    m = sub.add_parser("movielens", help="MovieLens ingestion and experiment")
    msub = m.add_subparsers(dest="ml_command", required=True)
    mi = msub.add_parser("ingest")
    for name in ("ratings", "scores", "tags", "movies", "labels"):
        mi.add_argument(f"--{name}", required=True)
    mi.add_argument("--threshold", type=float, default=0.9)
    mi.add_argument("--overrides")
    mi.add_argument("--min-ratings", type=int, default=200)
    mi.add_argument("--out", required=True)
    mi.set_defaults(func=cmd_ml_ingest)
    mr = msub.add_parser("run")
    mr.add_argument("--table", required=True, help="directory written by 'movielens ingest'")
    mr.add_argument("--genres", required=True)
    mr.add_argument("--k", required=True, help="comma-separated budgets")
    mr.add_argument("--trials", type=int, default=10)
    mr.add_argument("--seed", type=int)
    mr.add_argument("--min-ratings", type=int)
    mr.add_argument("--any-genre", action="store_true", help="skip the stereotypical-genre check")
    mr.add_argument("--out", required=True)
    mr.add_argument("--aggregate")
    mr.set_defaults(func=cmd_ml_run)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except BiasmaxError as exc:
        print(f"biasmax: {exc}", file=sys.stderr)
        return exc.exit_code
    except (OSError, ValueError) as exc:
        print(f"biasmax: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
