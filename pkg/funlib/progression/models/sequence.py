from ..errors import ArgumentError
from ..freezable import Freezable

import numpy as np

from typing import Sequence


class EventSequence(Freezable):
    """An ordering of events. ``order[p]`` is the index of the feature whose
    event happens at (0-based) position ``p``; stage ``k`` means the events at
    positions ``0..k-1`` have occurred.

    Args:

        order (``list`` of ``int``):

            A permutation of ``0..I-1``.
    """

    def __init__(self, order: Sequence[int]):
        order = np.array(order, dtype=np.int64).reshape(-1)
        if not np.array_equal(np.sort(order), np.arange(len(order))):
            raise ArgumentError("event order must be a permutation, got %s" % order)

        self.order = order
        self.freeze()

    @classmethod
    def from_names(cls, names: Sequence[str], feature_names: Sequence[str]):
        feature_names = list(feature_names)
        try:
            return cls([feature_names.index(name) for name in names])
        except ValueError as e:
            raise ArgumentError("unknown event in sequence %s: %s" % (names, e)) from e

    def __len__(self):
        return len(self.order)

    def __eq__(self, other):
        if not isinstance(other, EventSequence):
            return NotImplemented
        return np.array_equal(self.order, other.order)

    def __hash__(self):
        return hash(tuple(self.order))

    def __repr__(self):
        return "EventSequence(%s)" % list(self.order)

    @property
    def positions(self) -> np.ndarray:
        """``positions[i]`` is the 0-based position of feature ``i``."""
        positions = np.empty_like(self.order)
        positions[self.order] = np.arange(len(self.order))
        return positions

    def position_of(self, feature: int) -> int:
        return int(self.positions[feature])

    def move(self, feature: int, position: int) -> "EventSequence":
        """Get the sequence with ``feature`` re-inserted at ``position``, the
        other events keeping their relative order."""

        if not 0 <= position < len(self):
            raise ArgumentError(
                "position %d out of range for %d events" % (position, len(self))
            )
        rest = [f for f in self.order if f != feature]
        rest.insert(position, feature)
        return EventSequence(rest)

    def names(self, feature_names: Sequence[str]) -> list[str]:
        return [feature_names[i] for i in self.order]
