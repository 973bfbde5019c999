"""MovieLens ingestion and the movie-recommendation experiment.

Input files follow the MovieLens 20M layout (``ratings.csv``,
``genome-scores.csv``, ``genome-tags.csv``, ``movies.csv``) plus a lead
gender label file ``movieId,gender,confidence``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import pandas as pd

from .config import format_config, read_config
from .errors import BiasmaxError, DataError, FormatError, InputError
from .groups import CategoryStructure, GroupStructure, make_rng
from .harness import ALGORITHMS, TrialRecord, run_algorithm, trial_seed
from .objective import ObjectiveSpec, Sqrt, eval_objective

NO_GENRE = "(no genres listed)"
MALE = "male"
STEREOTYPE_RATIO = 2.0

COLUMNS = {
    "ratings": ("userId", "movieId", "rating"),
    "scores": ("movieId", "tagId", "relevance"),
    "tags": ("tagId", "tag"),
    "movies": ("movieId", "title", "genres"),
    "labels": ("movieId", "gender", "confidence"),
}


def _read(path, kind: str) -> pd.DataFrame:
    try:
        df = pd.read_csv(path)
    except pd.errors.EmptyDataError:
        raise FormatError(f"{path}: empty file") from None
    missing = [c for c in COLUMNS[kind] if c not in df.columns]
    if missing:
        raise FormatError(f"{path}: missing columns {missing}; header is {list(df.columns)}")
    return df


def read_overrides(path) -> dict[str, str]:
    """``genre,tag`` rows mapping genre names to genome tags."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"genre", "tag"} <= set(reader.fieldnames):
            raise FormatError(f"{path}: expected header 'genre,tag', got {reader.fieldnames}")
        return {row["genre"]: row["tag"] for row in reader}


@dataclass
class MovieTable:
    """Joined per-movie data.

    ``relevance[i, g]`` is the genome relevance of movie ``i`` for
    ``genres[g]``; ``movie_genres[i]`` are the genre labels of movie ``i``.
    ``users`` maps each user with at least ``min_ratings`` ratings to the
    rows of the movies they rated.
    """

    movie_ids: np.ndarray
    titles: list
    movie_genres: list
    avg_rating: np.ndarray
    gender: list
    confidence: np.ndarray
    genres: list
    relevance: np.ndarray
    users: dict
    user_counts: dict
    min_ratings: int
    counts: dict = field(default_factory=dict)
    unmatched: list = field(default_factory=list)

    def __len__(self):
        return self.movie_ids.size

    @property
    def male(self) -> np.ndarray:
        return np.array([g == MALE for g in self.gender], dtype=bool)

    def genre_index(self, genre: str) -> int:
        try:
            return self.genres.index(genre)
        except ValueError:
            raise InputError(f"genre {genre!r} has no relevance column") from None

    def genre_mask(self, genre: str) -> np.ndarray:
        return np.array([genre in gs for gs in self.movie_genres], dtype=bool)


def ingest_movielens(ratings_path, scores_path, tags_path, movies_path, labels_path,
                     threshold: float = 0.9, overrides: Optional[dict] = None,
                     min_ratings: int = 200) -> MovieTable:
    """Join the five inputs into a :class:`MovieTable`.

    A movie survives when it has a lead label with confidence at least
    ``threshold``, genome scores and at least one rating.
    """
    ratings = _read(ratings_path, "ratings")
    scores = _read(scores_path, "scores")
    tags = _read(tags_path, "tags")
    movies = _read(movies_path, "movies")
    labels = _read(labels_path, "labels")
    overrides = dict(overrides or {})

    counts = {"movies": len(movies), "labels": len(labels), "ratings": len(ratings),
              "users": int(ratings["userId"].nunique())}
    kept = labels[labels["confidence"] >= threshold]
    counts["labels_kept"] = len(kept)
    genome_movies = set(scores["movieId"].unique())
    counts["genome_movies"] = len(genome_movies)
    avg = ratings.groupby("movieId")["rating"].mean()
    counts["rated_movies"] = len(avg)

    table = movies.merge(kept[["movieId", "gender", "confidence"]], on="movieId", how="inner")
    table = table[table["movieId"].isin(genome_movies) & table["movieId"].isin(avg.index)]
    table = table.sort_values("movieId").reset_index(drop=True)
    counts["table_rows"] = len(table)

    all_genres = sorted({g for gs in movies["genres"].astype(str) for g in gs.split("|") if g != NO_GENRE})
    tag_ids = {str(t).lower(): int(i) for i, t in zip(tags["tagId"], tags["tag"])}
    genres, tag_for, unmatched = [], {}, []
    for g in all_genres:
        tag = overrides.get(g, g).lower()
        if tag in tag_ids:
            genres.append(g)
            tag_for[g] = tag_ids[tag]
        else:
            unmatched.append(g)

    ids = table["movieId"].to_numpy(dtype=np.int64)
    row_of = {int(m): r for r, m in enumerate(ids)}
    relevance = np.zeros((ids.size, len(genres)))
    if genres:
        col_of = {t: c for c, t in enumerate(tag_for[g] for g in genres)}
        sub = scores[scores["tagId"].isin(col_of) & scores["movieId"].isin(row_of)]
        rows = sub["movieId"].map(row_of).to_numpy(dtype=np.int64)
        cols = sub["tagId"].map(col_of).to_numpy(dtype=np.int64)
        relevance[rows, cols] = sub["relevance"].to_numpy(dtype=float)

    per_user = ratings.groupby("userId")["movieId"].count()
    user_counts = {int(u): int(c) for u, c in per_user.items()}
    qualifying = {u for u, c in user_counts.items() if c >= min_ratings}
    counts["qualifying_users"] = len(qualifying)
    users: dict[int, np.ndarray] = {}
    mine = ratings[ratings["userId"].isin(qualifying) & ratings["movieId"].isin(row_of)]
    for u, grp in mine.groupby("userId"):
        users[int(u)] = np.sort(grp["movieId"].map(row_of).to_numpy(dtype=np.int64))
    counts["user_movie_pairs"] = int(sum(v.size for v in users.values()))

    return MovieTable(
        movie_ids=ids,
        titles=table["title"].astype(str).tolist(),
        movie_genres=[tuple(g for g in str(s).split("|") if g != NO_GENRE) for s in table["genres"]],
        avg_rating=avg.reindex(ids).to_numpy(dtype=float),
        gender=[str(g).strip().lower() for g in table["gender"]],
        confidence=table["confidence"].to_numpy(dtype=float),
        genres=genres,
        relevance=relevance,
        users=users,
        user_counts=user_counts,
        min_ratings=int(min_ratings),
        counts=counts,
        unmatched=unmatched,
    )


def genre_ratio_table(table: MovieTable) -> list[dict]:
    """Mean relevance of each genre's own tag over its movies, by lead.

    ``ratio`` is non-male mean over male mean (NaN when either side is
    empty or the male mean is 0).
    """
    male = table.male
    out = []
    for g in table.genres:
        mask = table.genre_mask(g)
        col = table.relevance[:, table.genre_index(g)]
        m_vals, f_vals = col[mask & male], col[mask & ~male]
        m_mean = float(m_vals.mean()) if m_vals.size else math.nan
        f_mean = float(f_vals.mean()) if f_vals.size else math.nan
        ratio = f_mean / m_mean if m_vals.size and f_vals.size and m_mean > 0 else math.nan
        out.append({"genre": g, "male_mean": m_mean, "nonmale_mean": f_mean, "ratio": ratio,
                    "male_count": int(m_vals.size), "nonmale_count": int(f_vals.size)})
    return out


def stereotypical_genres(table: MovieTable, threshold: float = STEREOTYPE_RATIO) -> list[str]:
    """Genres whose male mean relevance is at least ``threshold`` times the non-male one."""
    out = []
    for row in genre_ratio_table(table):
        if row["nonmale_count"] and row["male_count"]:
            if row["male_mean"] >= threshold * row["nonmale_mean"]:
                out.append(row["genre"])
    return out


def run_movielens_experiment(table: MovieTable, genres: Sequence[str], ks: Sequence[int],
                             trials: int, seed: int = 0, min_ratings: Optional[int] = None,
                             algorithms: Sequence[str] = ALGORITHMS,
                             require_stereotypical: bool = True) -> list[TrialRecord]:
    """Per trial, draw a qualifying user and pick ``k`` of the movies they rated.

    The observed objective is ``sum_{g in genres} sqrt(sum_{i in S} r_ig)``;
    the latent score is the mean average rating of the chosen movies.
    Groups are male-led (reference) and non-male-led.
    """
    genres = list(genres)
    if not genres:
        raise InputError("need at least one genre")
    cols = [table.genre_index(g) for g in genres]
    if require_stereotypical:
        allowed = set(stereotypical_genres(table))
        bad = [g for g in genres if g not in allowed]
        if bad:
            raise InputError(f"genres {bad} are not stereotypical (male/non-male ratio < {STEREOTYPE_RATIO:g})")
    if trials < 1:
        raise InputError("trials must be at least 1")
    if any(int(k) < 1 for k in ks):
        raise InputError("every k must be at least 1")
    floor = table.min_ratings if min_ratings is None else int(min_ratings)
    users = sorted(u for u in table.users if table.user_counts.get(u, 0) >= floor)
    if not users:
        raise DataError(f"no user has at least {floor} ratings")

    pools = []
    for t in range(trials):
        s = trial_seed(seed, 0, t)
        user = users[int(make_rng(s).integers(len(users)))]
        pools.append((s, user, table.users[user]))

    male = table.male
    records = []
    for k in ks:
        k = int(k)
        for algo in algorithms:
            for s, user, pool in pools:
                records.append(_movie_trial(table, pool, cols, genres, male, k, algo, s))
    return records


def _movie_trial(table, pool, cols, genres, male, k, algo, seed) -> TrialRecord:
    W = table.relevance[np.ix_(pool, cols)]
    spec = ObjectiveSpec([Sqrt] * len(cols), W)
    groups = GroupStructure(np.where(male[pool], 0, 1), 2)
    frac = float(groups.gamma[0]) if pool.size else math.nan
    cats = CategoryStructure.from_sets(
        np.flatnonzero([g in table.movie_genres[i] for i in pool]) for g in genres)
    flags = set()
    if pool.size == 0:
        nan = math.nan
        return TrialRecord("movielens", nan, frac, nan, algo, seed, k, nan, nan, nan, (),
                           frozenset({"empty_pool"}))
    if k >= pool.size:
        chosen = list(range(pool.size))
        flags.add("k_exceeds_pool")
    else:
        try:
            res = run_algorithm(algo, spec, k, groups, cats)
        except BiasmaxError as exc:
            nan = math.nan
            return TrialRecord("movielens", nan, frac, nan, algo, seed, k, nan, nan, nan, (),
                               frozenset({f"error:{type(exc).__name__}"}))
        chosen = res.order
        flags |= res.flags
    latent = float(table.avg_rating[pool[chosen]].mean()) if chosen else math.nan
    return TrialRecord("movielens", math.nan, frac, math.nan, algo, seed, k, latent,
                       eval_objective(spec, chosen), math.nan,
                       tuple(int(c) for c in groups.counts(chosen)), frozenset(flags))


def write_table(table: MovieTable, out_dir) -> None:
    """Write ``movies.csv``, ``relevance.csv``, ``users.csv``, ``genre_ratios.csv``
    and ``ingest.cfg`` under ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "movies.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["movieId", "title", "genres", "avg_rating", "gender", "confidence"])
        for i in range(len(table)):
            w.writerow([int(table.movie_ids[i]), table.titles[i], "|".join(table.movie_genres[i]),
                        repr(float(table.avg_rating[i])), table.gender[i], repr(float(table.confidence[i]))])
    with open(out / "relevance.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["movieId"] + table.genres)
        for i in range(len(table)):
            w.writerow([int(table.movie_ids[i])] + [repr(float(x)) for x in table.relevance[i]])
    with open(out / "users.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["userId", "count", "movieId"])
        for u in sorted(table.users):
            for r in table.users[u]:
                w.writerow([u, table.user_counts[u], int(table.movie_ids[r])])
    with open(out / "genre_ratios.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        keys = ["genre", "male_mean", "nonmale_mean", "ratio", "male_count", "nonmale_count"]
        w.writerow(keys)
        for row in genre_ratio_table(table):
            w.writerow([row[k] if isinstance(row[k], (str, int)) else "%.6g" % row[k] for k in keys])
    meta = {f"count.{k}": str(v) for k, v in sorted(table.counts.items())}
    meta["min_ratings"] = str(table.min_ratings)
    meta["unmatched"] = ",".join(table.unmatched)
    (out / "ingest.cfg").write_text(format_config(meta))


def read_table(in_dir) -> MovieTable:
    """Inverse of :func:`write_table`."""
    d = Path(in_dir)
    movies = _read_plain(d / "movies.csv", ["movieId", "title", "genres", "avg_rating", "gender", "confidence"])
    rel = pd.read_csv(d / "relevance.csv")
    if "movieId" not in rel.columns:
        raise FormatError(f"{d / 'relevance.csv'}: missing movieId column")
    users_df = _read_plain(d / "users.csv", ["userId", "count", "movieId"])
    meta = read_config(d / "ingest.cfg")
    ids = movies["movieId"].to_numpy(dtype=np.int64)
    if not np.array_equal(rel["movieId"].to_numpy(dtype=np.int64), ids):
        raise FormatError(f"{d}: movies.csv and relevance.csv disagree on movie ids")
    row_of = {int(m): r for r, m in enumerate(ids)}
    users = {int(u): np.sort(g["movieId"].map(row_of).to_numpy(dtype=np.int64))
             for u, g in users_df.groupby("userId")}
    user_counts = {int(u): int(c) for u, c in users_df.groupby("userId")["count"].first().items()}
    genres = [c for c in rel.columns if c != "movieId"]
    return MovieTable(
        movie_ids=ids,
        titles=movies["title"].astype(str).tolist(),
        movie_genres=[tuple(g for g in str(s).split("|") if g and g != "nan") for s in movies["genres"]],
        avg_rating=movies["avg_rating"].to_numpy(dtype=float),
        gender=movies["gender"].astype(str).tolist(),
        confidence=movies["confidence"].to_numpy(dtype=float),
        genres=genres,
        relevance=rel[genres].to_numpy(dtype=float),
        users=users,
        user_counts=user_counts,
        min_ratings=int(meta.get("min_ratings", 200)),
        counts={k[len("count."):]: int(v) for k, v in meta.items() if k.startswith("count.")},
        unmatched=[g for g in meta.get("unmatched", "").split(",") if g],
    )


def _read_plain(path, columns) -> pd.DataFrame:
    df = pd.read_csv(path, keep_default_na=False)
    missing = [c for c in columns if c not in df.columns]
    if missing:
        raise FormatError(f"{path}: missing columns {missing}; header is {list(df.columns)}")
    return df
