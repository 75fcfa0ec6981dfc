"""Finite unions of closed time intervals."""

import math


class IntervalSet:
    """Sorted, disjoint union of closed intervals ``[a, b]``.

    Overlapping or touching pieces are merged on construction and
    zero-length pieces are dropped, so two sets with the same Lebesgue
    measure profile compare equal. Internally pieces behave as half-open
    ``[a, b)`` so shared endpoints are never counted twice.
    """

    __slots__ = ("_pieces",)

    def __init__(self, intervals=()):
        pieces = []
        for piece in intervals:
            a, b = piece
            a = float(a)
            b = float(b)
            if math.isnan(a) or math.isnan(b) or math.isinf(a) or math.isinf(b):
                raise ValueError(f"interval endpoints must be finite, got [{a}, {b}]")
            if a > b:
                raise ValueError(f"malformed interval [{a}, {b}]: start exceeds end")
            if b > a:
                pieces.append((a, b))
        pieces.sort()
        merged = []
        for a, b in pieces:
            if merged and a <= merged[-1][1]:
                if b > merged[-1][1]:
                    merged[-1] = (merged[-1][0], b)
            else:
                merged.append((a, b))
        self._pieces = tuple(merged)

    @classmethod
    def single(cls, a, b):
        return cls([(a, b)])

    @property
    def pieces(self):
        return self._pieces

    @property
    def measure(self):
        return math.fsum(b - a for a, b in self._pieces)

    def is_empty(self):
        return not self._pieces

    def union(self, other):
        return IntervalSet(self._pieces + IntervalSet._coerce(other)._pieces)

    def intersection(self, other):
        other = IntervalSet._coerce(other)
        out = []
        i = j = 0
        left, right = self._pieces, other._pieces
        while i < len(left) and j < len(right):
            a = max(left[i][0], right[j][0])
            b = min(left[i][1], right[j][1])
            if b > a:
                out.append((a, b))
            if left[i][1] < right[j][1]:
                i += 1
            else:
                j += 1
        return IntervalSet(out)

    def overlap(self, other):
        """Measure of the intersection with ``other``."""
        return self.intersection(other).measure

    def within(self, lo, hi):
        """True when every piece lies inside ``[lo, hi]``."""
        return all(lo <= a and b <= hi for a, b in self._pieces)

    def shift(self, offset):
        return IntervalSet((a + offset, b + offset) for a, b in self._pieces)

    def scale(self, factor):
        return IntervalSet((a * factor, b * factor) for a, b in self._pieces)

    __or__ = union
    __and__ = intersection

    def __iter__(self):
        return iter(self._pieces)

    def __len__(self):
        return len(self._pieces)

    def __eq__(self, other):
        if not isinstance(other, IntervalSet):
            return NotImplemented
        return self._pieces == other._pieces

    def __hash__(self):
        return hash(self._pieces)

    def __repr__(self):
        inner = ", ".join(f"[{a:.6g}, {b:.6g}]" for a, b in self._pieces)
        return f"IntervalSet({inner})"

    def to_list(self):
        return [[a, b] for a, b in self._pieces]

    @staticmethod
    def _coerce(obj):
        return obj if isinstance(obj, IntervalSet) else IntervalSet(obj)
