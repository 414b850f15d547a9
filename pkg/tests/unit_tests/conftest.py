import numpy as np
import pytest

from app.models.constants import FeedbackKind
from app.models.factor_model import SvdCfModel
from app.models.rating_model import RatingDataset
from app.services.base import BasePredictor

# Reconstructed R* of the four-user example and the cells that were observed.
R_STAR = [
    [0.98, 2.87, 2.96, 3.88],
    [5.14, 4.70, 4.32, 4.46],
    [3.94, 1.88, 1.45, 0.76],
    [4.39, 4.60, 4.33, 4.71],
]
MASK = [
    [1, 1, 0, 1],
    [1, 0, 1, 1],
    [1, 0, 1, 1],
    [0, 0, 1, 1],
]

# Observed ratings of the imputation example; None marks a missing cell.
SPARSE_RATINGS = [
    [1, 3, None, 4],
    [5, None, 4, 5],
    [4, None, 2, 1],
    [None, None, 3, 5],
]


def dataset_from_rows(rows, kind=FeedbackKind.EXPLICIT, scale=(1.0, 5.0)) -> RatingDataset:
    """Users u0.. and items i0.. from a dense table with None for missing cells."""
    return RatingDataset(
        kind=kind,
        scale=scale,
        users=[f"u{u}" for u in range(len(rows))],
        items=[f"i{i}" for i in range(len(rows[0]))],
        triples=[
            (u, i, float(value))
            for u, row in enumerate(rows)
            for i, value in enumerate(row)
            if value is not None
        ],
    )


def low_rank_dataset(
    n_users: int,
    n_items: int,
    rank: int,
    density: float,
    seed: int = 0,
    scale: tuple[float, float] = (-20.0, 20.0),
) -> RatingDataset:
    """Observed cells of a random rank-``rank`` matrix with N(0, 1) factors."""
    rng = np.random.default_rng(seed)
    U = rng.normal(size=(n_users, rank))
    V = rng.normal(size=(n_items, rank))
    R = U @ V.T
    observed = rng.random((n_users, n_items)) < density
    # every user and item keeps at least one observation
    observed[np.arange(n_users), rng.integers(0, n_items, n_users)] = True
    observed[rng.integers(0, n_users, n_items), np.arange(n_items)] = True
    triples = [
        (int(u), int(i), float(np.clip(R[u, i], *scale)))
        for u, i in zip(*np.nonzero(observed))
    ]
    return RatingDataset(
        scale=scale,
        users=[f"u{u}" for u in range(n_users)],
        items=[f"i{i}" for i in range(n_items)],
        triples=triples,
    )


@pytest.fixture
def r_star():
    """The reconstructed 4 x 4 example matrix."""
    return np.array(R_STAR)


@pytest.fixture
def mask():
    """Observation mask of the 4 x 4 example."""
    return np.array(MASK, dtype=float)


@pytest.fixture
def svd_model(r_star, mask):
    """SvdCfModel wrapping the printed reconstruction."""
    return SvdCfModel.from_reconstruction(r_star, mask, f=2)


@pytest.fixture
def sparse_ds():
    """The 4 x 4 example ratings with five missing cells."""
    return dataset_from_rows(SPARSE_RATINGS)


@pytest.fixture
def example_ds(r_star, mask):
    """Observed cells of the 4 x 4 example with R* values as ratings."""
    rows = [
        [round(float(r_star[u, i]), 2) if mask[u, i] else None for i in range(4)]
        for u in range(4)
    ]
    return dataset_from_rows(rows, scale=(0.0, 6.0))


class TablePredictor(BasePredictor):
    """Predicts from a fixed user x item table."""

    def __init__(self, table, seen=None):
        table = np.asarray(table, dtype=float)
        super().__init__(
            [f"u{u}" for u in range(table.shape[0])],
            [f"i{i}" for i in range(table.shape[1])],
            (1.0, 5.0),
            seen,
        )
        self.table = table

    def predict(self, u: int, i: int) -> float:
        return float(self.table[u, i])


def numeric_gradient(loss, tensor: np.ndarray, h: float = 1e-6) -> np.ndarray:
    """Central differences of ``loss()`` with respect to every entry of ``tensor``."""
    grad = np.zeros_like(tensor, dtype=float)
    for index in np.ndindex(tensor.shape):
        original = tensor[index]
        tensor[index] = original + h
        up = loss()
        tensor[index] = original - h
        down = loss()
        tensor[index] = original
        grad[index] = (up - down) / (2 * h)
    return grad


def relative_error(analytic, numeric) -> float:
    """||a - n|| / max(||a||, ||n||, 1); absolute below unit norm."""
    analytic, numeric = np.asarray(analytic, dtype=float), np.asarray(numeric, dtype=float)
    scale = max(np.linalg.norm(analytic), np.linalg.norm(numeric), 1.0)
    return float(np.linalg.norm(analytic - numeric) / scale)


def random_triples(rng: np.random.Generator, n_users: int, n_items: int) -> list:
    """A random nonempty set of (u, i, r) with r uniform on [1, 5]."""
    cells = [(u, i) for u in range(n_users) for i in range(n_items) if rng.random() < 0.6]
    cells = cells or [(0, 0)]
    return [(u, i, float(rng.uniform(1, 5))) for u, i in cells]
