from abc import ABC, abstractmethod
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence


def rank_items(scores: Mapping[int, float], k: int) -> list[int]:
    """Top-k item indices by score descending, ties by ascending index."""
    ordered = sorted(scores.items(), key=lambda pair: (-pair[1], pair[0]))
    return [item for item, _ in ordered[:k]]


class IPredictor(ABC):
    """Anything that scores (user, item) pairs by dense index."""

    @abstractmethod
    def predict(self, u: int, i: int) -> float:
        pass

    @abstractmethod
    def recommend(self, u: int, k: int) -> list[int]:
        pass


class ITrainer(ABC):
    @abstractmethod
    def train(self, ds: Any, config: Any) -> Any:
        pass


class BasePredictor(IPredictor):
    """Predictor bound to the id space and rating scale it was trained on.

    ``seen[u]`` holds the items user u already has; ``recommend`` ranks the
    others.
    """

    def __init__(
        self,
        users: Sequence[str],
        items: Sequence[str],
        scale: tuple[float, float],
        seen: Mapping[int, Iterable[int]] | None = None,
    ) -> None:
        self.users = list(users)
        self.items = list(items)
        self.scale = scale
        self.seen = {u: set(rated) for u, rated in (seen or {}).items()}

    @property
    def n_users(self) -> int:
        return len(self.users)

    @property
    def n_items(self) -> int:
        return len(self.items)

    def candidates(self, u: int) -> list[int]:
        rated = self.seen.get(u, set())
        return [i for i in range(self.n_items) if i not in rated]

    def recommend(self, u: int, k: int) -> list[int]:
        scores = {i: self.predict(u, i) for i in self.candidates(u)}
        return rank_items(scores, k)


class PathMixin:
    """Provides the file location a data manager works on."""

    def __init__(self, path: str | Path) -> None:
        self.path = Path(path)


class BaseDataManager(PathMixin):
    """Base data manager class responsible for reading and writing files."""

    def read_text(self) -> str:
        return self.path.read_text(encoding="utf-8")

    def write_text(self, text: str) -> None:
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self.path.write_text(text, encoding="utf-8")

    def exists(self) -> bool:
        return self.path.is_file()
