from collections import defaultdict
from typing import Any, Iterable, Iterator, Optional, Sequence

from pydantic import BaseModel, ConfigDict, Field, PrivateAttr

from app.exceptions import (
    DuplicateRatingError,
    EmptyDatasetError,
    RatingValidationError,
)
from app.models.constants import DuplicatePolicy, FeedbackKind

Triple = tuple[int, int, float]


class CsvSchema(BaseModel):
    """Describes how a ratings CSV stream is laid out and validated."""

    model_config = ConfigDict(frozen=True)

    has_header: bool = False
    kind: FeedbackKind = FeedbackKind.EXPLICIT
    scale: tuple[float, float] = (1.0, 5.0)
    duplicate_policy: DuplicatePolicy = DuplicatePolicy.KEEP_LAST
    delimiter: str = Field(default=",", min_length=1, max_length=1)


class RatingDataset(BaseModel):
    """Sparse (user, item, rating) triples with dense index maps.

    ``users[k]`` / ``items[k]`` are the opaque ids behind dense index ``k``;
    triples are stored by index. A ``multiset`` dataset (bootstrap resample)
    may repeat a (user, item) pair.
    """

    model_config = ConfigDict(frozen=True)

    kind: FeedbackKind = FeedbackKind.EXPLICIT
    scale: tuple[float, float] = (1.0, 5.0)
    users: list[str]
    items: list[str]
    triples: list[tuple[int, int, float]]
    timestamps: Optional[list[Optional[float]]] = None
    multiset: bool = False
    metadata: dict[str, Any] = Field(default_factory=dict)

    _user_index: dict[str, int] = PrivateAttr(default_factory=dict)
    _item_index: dict[str, int] = PrivateAttr(default_factory=dict)

    def model_post_init(self, __context: Any) -> None:
        self._user_index = {user: idx for idx, user in enumerate(self.users)}
        self._item_index = {item: idx for idx, item in enumerate(self.items)}

    # --- constructors ---
    @classmethod
    def from_triples(
        cls,
        triples: Iterable[tuple[str, str, float]],
        kind: FeedbackKind = FeedbackKind.EXPLICIT,
        scale: tuple[float, float] = (1.0, 5.0),
        duplicate_policy: DuplicatePolicy = DuplicatePolicy.KEEP_LAST,
    ) -> "RatingDataset":
        """Builds a dataset from raw-id triples, assigning indices by first use."""
        users: dict[str, int] = {}
        items: dict[str, int] = {}
        slots: dict[tuple[int, int], int] = {}
        indexed: list[list] = []
        for user, item, rating in triples:
            u = users.setdefault(str(user), len(users))
            i = items.setdefault(str(item), len(items))
            rating = float(rating)
            check_rating(rating, kind, scale)
            if (u, i) in slots:
                if duplicate_policy is DuplicatePolicy.ERROR:
                    raise DuplicateRatingError(f"duplicate pair ({user}, {item})")
                indexed[slots[(u, i)]][2] = rating
                continue
            slots[(u, i)] = len(indexed)
            indexed.append([u, i, rating])
        if not indexed:
            raise EmptyDatasetError("dataset has no ratings")
        return cls(
            kind=kind,
            scale=scale,
            users=list(users),
            items=list(items),
            triples=[tuple(t) for t in indexed],
        )

    def with_triples(
        self,
        triples: Sequence[Triple],
        timestamps: Optional[list[Optional[float]]] = None,
        multiset: Optional[bool] = None,
        metadata: Optional[dict[str, Any]] = None,
    ) -> "RatingDataset":
        """A derived dataset sharing this dataset's index maps, kind and scale."""
        return RatingDataset(
            kind=self.kind,
            scale=self.scale,
            users=self.users,
            items=self.items,
            triples=list(triples),
            timestamps=timestamps,
            multiset=self.multiset if multiset is None else multiset,
            metadata=metadata or {},
        )

    # --- accessors ---
    @property
    def n_users(self) -> int:
        return len(self.users)

    @property
    def n_items(self) -> int:
        return len(self.items)

    @property
    def user_index(self) -> dict[str, int]:
        return self._user_index

    @property
    def item_index(self) -> dict[str, int]:
        return self._item_index

    def __len__(self) -> int:
        return len(self.triples)

    def raw_triples(self) -> Iterator[tuple[str, str, float]]:
        for u, i, r in self.triples:
            yield self.users[u], self.items[i], r

    def user_items(self) -> dict[int, list[int]]:
        """Items each user interacted with, in dataset order, without repeats."""
        rated: dict[int, list[int]] = defaultdict(list)
        seen: set[tuple[int, int]] = set()
        for u, i, _ in self.triples:
            if (u, i) not in seen:
                seen.add((u, i))
                rated[u].append(i)
        return rated

    def user_ratings(self) -> dict[int, dict[int, float]]:
        ratings: dict[int, dict[int, float]] = defaultdict(dict)
        for u, i, r in self.triples:
            ratings[u][i] = r
        return ratings

    def mean_rating(self) -> float:
        if not self.triples:
            raise EmptyDatasetError("dataset has no ratings")
        return sum(r for _, _, r in self.triples) / len(self.triples)

    def same_index_space(self, other: "RatingDataset") -> bool:
        return self.users == other.users and self.items == other.items


def check_rating(
    rating: float,
    kind: FeedbackKind,
    scale: tuple[float, float],
    line: int | None = None,
) -> None:
    if kind is FeedbackKind.IMPLICIT:
        if rating not in (0.0, 1.0):
            raise RatingValidationError(
                f"implicit rating must be 0 or 1, got {rating:g}", line
            )
        return
    lo, hi = scale
    if not lo <= rating <= hi:
        raise RatingValidationError(
            f"rating {rating:g} outside scale [{lo:g}, {hi:g}]", line
        )
