"""Rating ingestion, dense views, imputation, negative sampling and splits."""

import io
import logging
import math
from collections import Counter, defaultdict
from pathlib import Path
from typing import Callable, Iterable, TextIO

import numpy as np
import pandas as pd

from app.config import settings
from app.exceptions import (
    CapacityError,
    DuplicateRatingError,
    EmptyDatasetError,
    InputError,
    NoDataError,
    ParseError,
    RangeError,
    RatingValidationError,
    RecofactorError,
    ShapeError,
)
from app.models.constants import DuplicatePolicy, FeedbackKind, ImputeStrategy
from app.models.linalg_model import DenseMatrix, MaskMatrix
from app.models.rating_model import CsvSchema, RatingDataset, Triple

logger = logging.getLogger(__name__)

MISSING = np.nan

# "overflow" only fills when a row has more than four fields.
COLUMNS = ["user", "item", "rating", "timestamp", "overflow"]


def _data_lines(lines: list[str], has_header: bool) -> list[int]:
    """1-based physical line of every frame row, in frame order."""
    numbers = [
        line_no
        for line_no, text in enumerate(lines, start=1)
        if text and not text.startswith("#")
    ]
    return numbers[1:] if has_header else numbers


def _read_frame(lines: list[str], schema: CsvSchema) -> pd.DataFrame:
    return pd.read_csv(
        io.StringIO("\n".join(lines)),
        sep=schema.delimiter,
        header=0 if schema.has_header else None,
        names=COLUMNS,
        index_col=False,
        dtype=str,
        keep_default_na=False,
        comment="#",
        skip_blank_lines=True,
        engine="python",
        on_bad_lines=lambda fields: fields[: len(COLUMNS)],
    )


def _row_checks(
    frame: pd.DataFrame, schema: CsvSchema
) -> list[tuple[pd.Series, Callable[[int, int], RecofactorError]]]:
    """Per-row failure masks, in the order a single line is validated."""
    present = frame[COLUMNS].notna()
    n_fields = present.sum(axis=1)
    rating_text = frame["rating"].fillna("")
    timestamp_text = frame["timestamp"].fillna("").str.strip()
    rating = frame["rating_value"]
    timestamp = frame["timestamp_value"]

    if schema.kind is FeedbackKind.IMPLICIT:
        off_scale = ~rating.isin([0.0, 1.0])

        def scale_error(row: int, line: int) -> RecofactorError:
            return RatingValidationError(
                f"implicit rating must be 0 or 1, got {rating.iat[row]:g}", line
            )
    else:
        lo, hi = schema.scale
        off_scale = ~rating.between(lo, hi)

        def scale_error(row: int, line: int) -> RecofactorError:
            return RatingValidationError(
                f"rating {rating.iat[row]:g} outside scale [{lo:g}, {hi:g}]", line
            )

    duplicated = frame.duplicated(["user", "item"], keep="first")
    if schema.duplicate_policy is not DuplicatePolicy.ERROR:
        duplicated = pd.Series(False, index=frame.index)

    def field_count(row: int, line: int) -> RecofactorError:
        got = "more than 4" if present["overflow"].iat[row] else str(n_fields.iat[row])
        return ParseError(
            f"expected 3 or 4 fields (user,item,rating[,timestamp]), got {got}", line
        )

    return [
        (~n_fields.isin([3, 4]), field_count),
        (frame["user"].fillna("") == "", lambda row, line: ParseError("user: empty id", line)),
        (frame["item"].fillna("") == "", lambda row, line: ParseError("item: empty id", line)),
        (
            ~np.isfinite(rating),
            lambda row, line: ParseError(
                f"rating: not a finite number '{rating_text.iat[row]}'", line
            ),
        ),
        (
            (timestamp_text != "") & ~np.isfinite(timestamp),
            lambda row, line: ParseError(
                f"timestamp: not a finite number '{timestamp_text.iat[row]}'", line
            ),
        ),
        (off_scale, scale_error),
        (
            duplicated,
            lambda row, line: DuplicateRatingError(
                f"duplicate pair ({frame['user'].iat[row]}, {frame['item'].iat[row]})", line
            ),
        ),
    ]


def parse_csv(stream: Iterable[str], schema: CsvSchema | None = None) -> RatingDataset:
    """Parses ``user,item,rating[,timestamp]`` lines into a dataset.

    Blank lines and lines starting with ``#`` are skipped; a ``#`` later in a
    line starts a trailing comment. Duplicate pairs are resolved by
    ``schema.duplicate_policy``; keep-last leaves the pair at its first
    position.
    """
    schema = schema or CsvSchema(scale=settings.DEFAULT_RATING_SCALE)
    lines = [line.strip() for line in stream]
    line_of = _data_lines(lines, schema.has_header)
    if not line_of:
        raise EmptyDatasetError("no ratings in input")

    frame = _read_frame(lines, schema)
    if len(frame) != len(line_of):
        raise ParseError("unbalanced quotes", line_of[min(len(frame), len(line_of) - 1)])
    frame["user"] = frame["user"].str.strip()
    frame["item"] = frame["item"].str.strip()
    frame["rating_value"] = pd.to_numeric(frame["rating"].str.strip(), errors="coerce")
    frame["timestamp_value"] = pd.to_numeric(frame["timestamp"].str.strip(), errors="coerce")

    checks = _row_checks(frame, schema)
    failing = np.logical_or.reduce([mask.to_numpy(dtype=bool) for mask, _ in checks])
    if failing.any():
        row = int(np.argmax(failing))
        for mask, error in checks:
            if mask.iat[row]:
                raise error(row, line_of[row])

    frame["u"], users = pd.factorize(frame["user"])
    frame["i"], items = pd.factorize(frame["item"])
    frame["slot"] = frame.groupby(["u", "i"], sort=False).ngroup()
    kept = frame.drop_duplicates(["u", "i"], keep="last").sort_values("slot")

    triples = list(
        zip(kept["u"].tolist(), kept["i"].tolist(), kept["rating_value"].astype(float).tolist())
    )
    timestamps = [None if pd.isna(t) else float(t) for t in kept["timestamp_value"]]
    logger.debug("parsed %d ratings, %d users, %d items", len(triples), len(users), len(items))
    return RatingDataset(
        kind=schema.kind,
        scale=schema.scale,
        users=list(users),
        items=list(items),
        triples=triples,
        timestamps=timestamps if any(t is not None for t in timestamps) else None,
    )


def read_csv(path: str | Path, schema: CsvSchema | None = None) -> RatingDataset:
    path = Path(path)
    if not path.is_file():
        raise InputError(f"ratings file not found: {path}")
    with path.open(encoding="utf-8") as stream:
        return parse_csv(stream, schema)


def _format_number(value: float) -> str:
    return str(int(value)) if float(value).is_integer() else repr(float(value))


def write_csv(ds: RatingDataset, stream: TextIO, header: bool = False) -> None:
    frame = pd.DataFrame(list(ds.raw_triples()), columns=["user", "item", "rating"])
    frame["rating"] = frame["rating"].map(_format_number)
    frame.to_csv(stream, header=header, index=False, lineterminator="\n")


def to_dense(ds: RatingDataset) -> tuple[DenseMatrix, MaskMatrix]:
    """Dense m x n view with NaN marking missing cells, plus the mask."""
    cells = ds.n_users * ds.n_items
    if cells > settings.DENSE_CELL_CAP:
        raise CapacityError(
            f"{ds.n_users} x {ds.n_items} = {cells} cells exceeds the dense cap "
            f"of {settings.DENSE_CELL_CAP}; use a factor model (funk, svdpp, fm)"
        )
    matrix = np.full((ds.n_users, ds.n_items), MISSING)
    mask = np.zeros((ds.n_users, ds.n_items))
    for u, i, r in ds.triples:
        matrix[u, i] = r
        mask[u, i] = 1.0
    return matrix, mask


def sparsify(matrix: DenseMatrix, mask: MaskMatrix) -> list[Triple]:
    """Observed cells of ``matrix`` as (u, i, r) triples in row-major order."""
    matrix = np.asarray(matrix, dtype=np.float64)
    mask = np.asarray(mask)
    if matrix.shape != mask.shape:
        raise ShapeError(f"dimension mismatch: {matrix.shape} vs {mask.shape}")
    rows, cols = np.nonzero(mask)
    return [(int(u), int(i), float(matrix[u, i])) for u, i in zip(rows, cols)]


def impute(
    matrix: DenseMatrix,
    mask: MaskMatrix,
    strategy: ImputeStrategy | str = ImputeStrategy.USER,
) -> DenseMatrix:
    """Fills unobserved cells with the global, per-user or per-item mean.

    Rows (or columns) without any observation fall back to the global mean.
    """
    strategy = ImputeStrategy(strategy)
    matrix = np.asarray(matrix, dtype=np.float64)
    mask = np.asarray(mask, dtype=np.float64)
    if matrix.shape != mask.shape:
        raise ShapeError(f"dimension mismatch: {matrix.shape} vs {mask.shape}")
    observed = mask == 1
    if not observed.any():
        raise NoDataError("cannot impute a matrix without observed entries")

    values = np.where(observed, matrix, 0.0)
    global_mean = float(values.sum() / observed.sum())
    if strategy is ImputeStrategy.GLOBAL:
        fill = np.full(matrix.shape, global_mean)
    else:
        axis = 1 if strategy is ImputeStrategy.USER else 0
        counts = observed.sum(axis=axis)
        sums = values.sum(axis=axis)
        means = np.where(counts > 0, sums / np.maximum(counts, 1), global_mean)
        if np.any(counts == 0):
            logger.info(
                "%d %s(s) without observations use the global mean",
                int(np.sum(counts == 0)),
                "user" if axis == 1 else "item",
            )
        fill = np.broadcast_to(means[:, None] if axis == 1 else means[None, :], matrix.shape)
    return np.where(observed, matrix, fill)


def negative_sample(
    ds: RatingDataset, ratio: float | None = None, seed: int | None = None
) -> RatingDataset:
    """Adds zero-rated pairs so each user has about ``ratio`` negatives per positive.

    Negatives come from items the user never interacted with, drawn without
    replacement with probability proportional to the item's positive count.
    """
    if ds.kind is not FeedbackKind.IMPLICIT:
        raise InputError("negative sampling needs an implicit-feedback dataset")
    ratio = settings.DEFAULT_NEG_RATIO if ratio is None else ratio
    if not ratio > 0:
        raise RangeError(f"ratio must be positive, got {ratio}")
    rng = np.random.default_rng(settings.DEFAULT_SEED if seed is None else seed)

    popularity = np.zeros(ds.n_items)
    interacted: dict[int, set[int]] = defaultdict(set)
    positives: Counter[int] = Counter()
    for u, i, r in ds.triples:
        interacted[u].add(i)
        if r == 1.0:
            positives[u] += 1
            popularity[i] += 1

    added: list[Triple] = []
    skipped = short = 0
    for u in sorted(positives):
        wanted = math.floor(ratio * positives[u] + 0.5)
        remaining = np.array([i for i in range(ds.n_items) if i not in interacted[u]])
        if remaining.size == 0:
            skipped += 1
            continue
        if remaining.size < wanted:
            short += 1
        weights = popularity[remaining]
        for _ in range(min(wanted, remaining.size)):
            total = float(weights.sum())
            if total > 0:
                pick = int(np.searchsorted(np.cumsum(weights), rng.random() * total, side="right"))
                pick = min(pick, remaining.size - 1)
            else:
                pick = int(rng.integers(remaining.size))
            added.append((u, int(remaining[pick]), 0.0))
            remaining = np.delete(remaining, pick)
            weights = np.delete(weights, pick)

    if skipped:
        logger.warning("%d user(s) had no unseen items and got no negatives", skipped)
    if short:
        logger.warning("%d user(s) had fewer unseen items than requested negatives", short)
    timestamps = None
    if ds.timestamps is not None:
        timestamps = list(ds.timestamps) + [None] * len(added)
    return ds.with_triples(
        list(ds.triples) + added,
        timestamps=timestamps,
        metadata={
            **ds.metadata,
            "negatives_added": len(added),
            "skipped_users": skipped,
            "short_users": short,
        },
    )


def split(
    ds: RatingDataset, fraction: float, seed: int | None = None
) -> tuple[RatingDataset, RatingDataset]:
    """Random train/test split keeping at least one training rating per user.

    Test size targets round(fraction * N); pairs that would strip a user of
    their last training rating stay in train and the shortfall is recorded.
    """
    if not 0 < fraction < 1:
        raise RangeError(f"holdout fraction must be in (0, 1), got {fraction}")
    rng = np.random.default_rng(settings.DEFAULT_SEED if seed is None else seed)
    target = math.floor(fraction * len(ds) + 0.5)
    left = Counter(u for u, _, _ in ds.triples)

    test_rows: set[int] = set()
    for row in rng.permutation(len(ds)):
        if len(test_rows) >= target:
            break
        u = ds.triples[row][0]
        if left[u] > 1:
            left[u] -= 1
            test_rows.add(int(row))

    shortfall = target - len(test_rows)
    if shortfall:
        logger.warning(
            "holdout short by %d rating(s) to keep every user in train", shortfall
        )
    metadata = {"requested_test": target, "stratification_shortfall": shortfall}

    def subset(rows: list[int]) -> RatingDataset:
        timestamps = None
        if ds.timestamps is not None:
            timestamps = [ds.timestamps[r] for r in rows]
        return ds.with_triples(
            [ds.triples[r] for r in rows], timestamps=timestamps, metadata=metadata
        )

    train_rows = [r for r in range(len(ds)) if r not in test_rows]
    return subset(train_rows), subset(sorted(test_rows))
