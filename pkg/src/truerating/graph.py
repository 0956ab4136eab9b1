"""Bipartite user-to-item rating graph with dual adjacency views.

Users rate items at most once and every edge weight lives on [0, 1]. The
graph keeps two sorted views of the same edge multiset: a user-major view
(each user's outgoing ratings are one contiguous slice) and an item-major
view (each item's incoming ratings are one contiguous slice), so per-user
and per-item sweeps both run in O(edges). Graphs are immutable after
construction and safe to share across threads.
"""

from __future__ import annotations

from collections.abc import Iterable, Sequence
from dataclasses import dataclass

import numpy as np

__all__ = [
    "NUM_BINS",
    "RatingScale",
    "bin_of",
    "bin_label",
    "degree_bins",
    "RatingGraph",
    "degree_histogram",
]

#: Items are grouped by how many ratings they received: bin k covers
#: [2**(k-1), 2**k - 1] ratings, with the last bin open-ended (>1023).
NUM_BINS = 11

# Upper edge of bins 1..10; anything above the last entry falls in bin 11.
_BIN_UPPER = np.array([1, 3, 7, 15, 31, 63, 127, 255, 511, 1023], dtype=np.int64)


@dataclass(frozen=True)
class RatingScale:
    """Linear map from a raw rating range [min_raw, max_raw] onto [0, 1]."""

    min_raw: float
    max_raw: float

    def __post_init__(self) -> None:
        if not (np.isfinite(self.min_raw) and np.isfinite(self.max_raw)):
            raise ValueError("rating scale endpoints must be finite")
        if not self.max_raw > self.min_raw:
            raise ValueError(
                f"rating scale requires max_raw > min_raw, got "
                f"[{self.min_raw}, {self.max_raw}]"
            )

    @property
    def span(self) -> float:
        return self.max_raw - self.min_raw

    def normalize(self, raw: float) -> float:
        """Map a raw rating to [0, 1]; raises if outside the scale."""
        if not self.min_raw <= raw <= self.max_raw:
            raise ValueError(
                f"rating {raw!r} outside scale [{self.min_raw}, {self.max_raw}]"
            )
        return (raw - self.min_raw) / self.span


def bin_of(num_ratings: int) -> int:
    """Bin index 1..11 for an item that received `num_ratings` ratings.

    Bin boundaries double: 1, 2-3, 4-7, ..., 512-1023, >1023. Equivalent to
    floor(log2(n)) + 1 capped at 11, computed exactly in integer arithmetic.
    """
    n = int(num_ratings)
    if n < 1:
        raise ValueError(f"number of ratings must be >= 1, got {num_ratings}")
    return min(n.bit_length(), NUM_BINS)


def bin_label(bin_index: int) -> str:
    """Human-readable rating-count range for a bin, e.g. ``'4-7'``."""
    if not 1 <= bin_index <= NUM_BINS:
        raise ValueError(f"bin index must be in 1..{NUM_BINS}, got {bin_index}")
    if bin_index == 1:
        return "1"
    if bin_index == NUM_BINS:
        return f">{_BIN_UPPER[-1]}"
    return f"{2 ** (bin_index - 1)}-{2 ** bin_index - 1}"


def degree_bins(degrees: np.ndarray) -> np.ndarray:
    """Vectorized `bin_of` over an array of positive rating counts."""
    degrees = np.asarray(degrees, dtype=np.int64)
    if degrees.size and degrees.min() < 1:
        raise ValueError("all rating counts must be >= 1")
    return np.searchsorted(_BIN_UPPER, degrees, side="left") + 1


class RatingGraph:
    """Immutable bipartite rating graph.

    Attributes
    ----------
    user_ids / item_ids : tuple[str, ...]
        Dense index -> external id, in first-appearance order.
    user_index / item_index : dict[str, int]
        External id -> dense index.
    edge_user, edge_item, edge_weight : np.ndarray
        The edge list in canonical (user-major, item-ascending) order.
    user_ptr / item_ptr : np.ndarray
        CSR-style slice pointers: user i's edges are
        ``edge_*[user_ptr[i]:user_ptr[i+1]]``; item j's edges are
        ``by_item_*[item_ptr[j]:item_ptr[j+1]]`` in the item-major view.
    by_item_user, by_item_item, by_item_weight : np.ndarray
        The same edge multiset sorted item-major (user-ascending within
        an item, i.e. the stable restriction of the canonical order).
    """

    __slots__ = (
        "user_ids",
        "item_ids",
        "user_index",
        "item_index",
        "edge_user",
        "edge_item",
        "edge_weight",
        "user_ptr",
        "item_ptr",
        "by_item_user",
        "by_item_item",
        "by_item_weight",
    )

    def __init__(
        self,
        user_ids: Sequence[str],
        item_ids: Sequence[str],
        edge_user: np.ndarray,
        edge_item: np.ndarray,
        edge_weight: np.ndarray,
    ) -> None:
        user_ids = tuple(str(u) for u in user_ids)
        item_ids = tuple(str(i) for i in item_ids)
        if len(set(user_ids)) != len(user_ids):
            raise ValueError("duplicate user ids")
        if len(set(item_ids)) != len(item_ids):
            raise ValueError("duplicate item ids")

        u = np.asarray(edge_user, dtype=np.int64)
        v = np.asarray(edge_item, dtype=np.int64)
        w = np.asarray(edge_weight, dtype=np.float64)
        if not (u.shape == v.shape == w.shape) or u.ndim != 1:
            raise ValueError("edge arrays must be 1-d and equally sized")

        n_users, n_items = len(user_ids), len(item_ids)
        if u.size:
            if u.min() < 0 or u.max() >= n_users:
                raise ValueError("edge user index out of range")
            if v.min() < 0 or v.max() >= n_items:
                raise ValueError("edge item index out of range")
        if w.size and (not np.isfinite(w).all() or w.min() < 0.0 or w.max() > 1.0):
            raise ValueError("edge weights must lie in [0, 1]")

        # Canonical order: by user, then by item. Makes serialization and
        # accumulation order deterministic regardless of input order.
        order = np.lexsort((v, u))
        u, v, w = u[order], v[order], w[order]
        if u.size > 1:
            same = (u[1:] == u[:-1]) & (v[1:] == v[:-1])
            if same.any():
                k = int(np.flatnonzero(same)[0])
                raise ValueError(
                    f"duplicate rating for user {user_ids[u[k]]!r} "
                    f"and item {item_ids[v[k]]!r}"
                )

        user_deg = np.bincount(u, minlength=n_users)
        item_deg = np.bincount(v, minlength=n_items)
        if n_users and user_deg.min() == 0:
            raise ValueError("isolated user (zero outgoing ratings)")
        if n_items and item_deg.min() == 0:
            raise ValueError("isolated item (zero incoming ratings)")

        by_item = np.lexsort((u, v))

        self.user_ids = user_ids
        self.item_ids = item_ids
        self.user_index = {uid: k for k, uid in enumerate(user_ids)}
        self.item_index = {iid: k for k, iid in enumerate(item_ids)}
        self.edge_user = u
        self.edge_item = v
        self.edge_weight = w
        self.user_ptr = np.concatenate(([0], np.cumsum(user_deg))).astype(np.int64)
        self.item_ptr = np.concatenate(([0], np.cumsum(item_deg))).astype(np.int64)
        self.by_item_user = u[by_item]
        self.by_item_item = v[by_item]
        self.by_item_weight = w[by_item]
        for name in (
            "edge_user",
            "edge_item",
            "edge_weight",
            "user_ptr",
            "item_ptr",
            "by_item_user",
            "by_item_item",
            "by_item_weight",
        ):
            getattr(self, name).flags.writeable = False

    @classmethod
    def from_edges(
        cls,
        edges: Iterable[tuple[str, str, float]],
        *,
        duplicate_policy: str = "strict",
    ) -> "RatingGraph":
        """Build a graph from (user id, item id, weight) triples.

        Dense indices are assigned in first-appearance order. Under the
        ``strict`` policy a repeated (user, item) pair is an error; under
        ``keep_first`` later occurrences are dropped.
        """
        if duplicate_policy not in ("strict", "keep_first"):
            raise ValueError(f"unknown duplicate policy {duplicate_policy!r}")
        user_index: dict[str, int] = {}
        item_index: dict[str, int] = {}
        seen: set[tuple[int, int]] = set()
        us: list[int] = []
        vs: list[int] = []
        ws: list[float] = []
        for user_id, item_id, weight in edges:
            ui = user_index.setdefault(str(user_id), len(user_index))
            vi = item_index.setdefault(str(item_id), len(item_index))
            if (ui, vi) in seen:
                if duplicate_policy == "strict":
                    raise ValueError(
                        f"duplicate rating for user {user_id!r} and item {item_id!r}"
                    )
                continue
            seen.add((ui, vi))
            us.append(ui)
            vs.append(vi)
            ws.append(float(weight))
        return cls(
            list(user_index),
            list(item_index),
            np.array(us, dtype=np.int64),
            np.array(vs, dtype=np.int64),
            np.array(ws, dtype=np.float64),
        )

    @property
    def num_users(self) -> int:
        return len(self.user_ids)

    @property
    def num_items(self) -> int:
        return len(self.item_ids)

    @property
    def num_edges(self) -> int:
        return int(self.edge_weight.size)

    @property
    def user_degrees(self) -> np.ndarray:
        return np.diff(self.user_ptr)

    @property
    def item_degrees(self) -> np.ndarray:
        return np.diff(self.item_ptr)

    def edges(self) -> Iterable[tuple[str, str, float]]:
        """Yield (user id, item id, weight) in canonical order."""
        for u, v, w in zip(self.edge_user, self.edge_item, self.edge_weight):
            yield self.user_ids[u], self.item_ids[v], float(w)

    def item_means(self) -> np.ndarray:
        """Plain per-item mean rating, accumulated in item-major slice order.

        This is the summation order the solver uses, so a fully-trusted run
        (all damping factors zero) reproduces these values bit-exactly.
        """
        sums = np.bincount(
            self.by_item_item, weights=self.by_item_weight, minlength=self.num_items
        )
        return sums / np.maximum(self.item_degrees, 1)

    def __repr__(self) -> str:
        return (
            f"RatingGraph(users={self.num_users}, items={self.num_items}, "
            f"edges={self.num_edges})"
        )


def degree_histogram(graph: RatingGraph) -> np.ndarray:
    """Count items per rating-count bin; index k holds bin k+1's count."""
    counts = np.zeros(NUM_BINS, dtype=np.int64)
    if graph.num_items:
        bins = degree_bins(graph.item_degrees)
        counts += np.bincount(bins - 1, minlength=NUM_BINS)
    return counts
