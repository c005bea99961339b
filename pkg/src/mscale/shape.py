"""Piecewise shape descriptions (monotone / convex pieces, pins, anchors)
and their derivation from a fitted sequence."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ParameterError
from .tautstring import local_extremes

DIRECTIONS = ("nondecreasing", "nonincreasing")
SENSES = ("convex", "concave")


@dataclass(frozen=True)
class ShapeSpec:
    """Shape restrictions over 1-based index ranges.

    ``monotone`` and ``convex`` hold ``(lo, hi, direction/sense)`` triples
    in increasing order; consecutive pieces may share their endpoint (the
    anchor where the shape switches) but must not overlap further.
    ``extreme_anchors[q]`` is the candidate index range for the switch
    between monotone pieces q and q + 1, likewise ``inflection_anchors``
    for convex pieces.  ``pins`` fixes g at given indices.
    """

    monotone: tuple = ()
    convex: tuple = ()
    pins: tuple = ()
    extreme_anchors: tuple = ()
    inflection_anchors: tuple = ()
    n: int | None = field(default=None, compare=False)

    def __post_init__(self):
        mono = tuple((int(a), int(b), str(d)) for a, b, d in self.monotone)
        cvx = tuple((int(a), int(b), str(d)) for a, b, d in self.convex)
        object.__setattr__(self, "monotone", mono)
        object.__setattr__(self, "convex", cvx)
        object.__setattr__(self, "pins", tuple((int(i), float(v)) for i, v in self.pins))
        object.__setattr__(self, "extreme_anchors",
                           tuple((int(a), int(b)) for a, b in self.extreme_anchors))
        object.__setattr__(self, "inflection_anchors",
                           tuple((int(a), int(b)) for a, b in self.inflection_anchors))
        for _, _, d in mono:
            if d not in DIRECTIONS:
                raise ParameterError(f"unknown direction {d!r}")
        for _, _, d in cvx:
            if d not in SENSES:
                raise ParameterError(f"unknown sense {d!r}")
        _check_pieces(mono, "monotone")
        _check_pieces(cvx, "convex")
        _check_anchors(mono, self.extreme_anchors, "extreme")
        _check_anchors(cvx, self.inflection_anchors, "inflection")
        if self.n is not None:
            self.validate(self.n)

    def validate(self, n: int):
        for lo, hi, _ in self.monotone + self.convex:
            if lo < 1 or hi > n:
                raise ParameterError(f"piece [{lo}, {hi}] outside 1..{n}")
        for i, _ in self.pins:
            if not 1 <= i <= n:
                raise ParameterError(f"pin index {i} outside 1..{n}")
        for a, b in self.extreme_anchors + self.inflection_anchors:
            if a < 1 or b > n:
                raise ParameterError(f"anchor [{a}, {b}] outside 1..{n}")

    # serialization ----------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "monotone": [{"lo": a, "hi": b, "direction": d} for a, b, d in self.monotone],
            "convex": [{"lo": a, "hi": b, "sense": d} for a, b, d in self.convex],
            "pins": [{"index": i, "value": v} for i, v in self.pins],
            "extreme_anchors": [{"lo": a, "hi": b} for a, b in self.extreme_anchors],
            "inflection_anchors": [{"lo": a, "hi": b} for a, b in self.inflection_anchors],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ShapeSpec":
        unknown = set(d) - {"monotone", "convex", "pins", "extreme_anchors", "inflection_anchors"}
        if unknown:
            raise ParameterError(f"unknown shape keys: {sorted(unknown)}")
        try:
            return cls(
                monotone=[(p["lo"], p["hi"], p["direction"]) for p in d.get("monotone", [])],
                convex=[(p["lo"], p["hi"], p["sense"]) for p in d.get("convex", [])],
                pins=[(p["index"], p["value"]) for p in d.get("pins", [])],
                extreme_anchors=[(p["lo"], p["hi"]) for p in d.get("extreme_anchors", [])],
                inflection_anchors=[(p["lo"], p["hi"]) for p in d.get("inflection_anchors", [])],
            )
        except (KeyError, TypeError) as exc:
            raise ParameterError(f"malformed shape description: {exc}") from exc

    @classmethod
    def load(cls, path) -> "ShapeSpec":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def dump(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    def merged(self, other: "ShapeSpec") -> "ShapeSpec":
        return ShapeSpec(self.monotone or other.monotone, self.convex or other.convex,
                         self.pins + other.pins,
                         self.extreme_anchors or other.extreme_anchors,
                         self.inflection_anchors or other.inflection_anchors)


def _check_pieces(pieces, what):
    for lo, hi, _ in pieces:
        if lo > hi:
            raise ParameterError(f"{what} piece [{lo}, {hi}] is empty")
    for (a0, b0, _), (a1, b1, _) in zip(pieces, pieces[1:]):
        if a1 < b0:
            raise ParameterError(f"{what} pieces [{a0}, {b0}] and [{a1}, {b1}] overlap")


def _check_anchors(pieces, anchors, what):
    if anchors and len(anchors) != len(pieces) - 1:
        raise ParameterError(f"need one {what} anchor per switch between consecutive pieces")
    for lo, hi in anchors:
        if lo > hi:
            raise ParameterError(f"{what} anchor [{lo}, {hi}] is empty")
    for (_, b0), (a1, _) in zip(anchors, anchors[1:]):
        if a1 <= b0:
            raise ParameterError(f"{what} anchors must be disjoint and increasing")


def _pieces_from_breaks(n, breaks, labels):
    edges = [1] + list(breaks) + [n]
    return [(edges[q], edges[q + 1], labels[q]) for q in range(len(labels))]


def shape_from_fit(values) -> ShapeSpec:
    """Monotone pieces switching at the local extremes of a fit.

    Each extreme plateau becomes an anchor interval; the default switch
    point is its midpoint.
    """
    v = np.asarray(values, dtype=np.float64)
    n = v.size
    ext = local_extremes(v)
    if not ext:
        d = "nondecreasing" if v[-1] >= v[0] else "nonincreasing"
        return ShapeSpec(monotone=[(1, n, d)])
    anchors = [(lo, hi) for _, lo, hi in ext]
    breaks = [(lo + hi) // 2 for lo, hi in anchors]
    first = "nondecreasing" if ext[0][0] == "max" else "nonincreasing"
    labels = [first]
    for _ in ext:
        labels.append("nonincreasing" if labels[-1] == "nondecreasing" else "nondecreasing")
    return ShapeSpec(monotone=_pieces_from_breaks(n, breaks, labels), extreme_anchors=anchors)


def convexity_from_fit(values, rtol: float = 1e-9) -> ShapeSpec:
    """Convex / concave pieces from the signs of a fit's second differences.

    Inflection anchors span the gap between the last bend of one sign and
    the first bend of the other.
    """
    v = np.asarray(values, dtype=np.float64)
    n = v.size
    if n < 3:
        return ShapeSpec(convex=[(1, n, "convex")])
    d2 = np.diff(v, 2)
    tol = rtol * max(1.0, float(np.abs(np.diff(v)).max(initial=0.0)))
    sgn = np.where(d2 > tol, 1, np.where(d2 < -tol, -1, 0))
    pos = np.flatnonzero(sgn)
    if pos.size == 0:
        return ShapeSpec(convex=[(1, n, "convex")])
    anchors = []
    labels = ["convex" if sgn[pos[0]] > 0 else "concave"]
    for a, b in zip(pos[:-1], pos[1:]):
        if sgn[a] != sgn[b]:
            # d2[m] sits at 1-based index m + 2
            anchors.append((int(a) + 2, int(b) + 2))
            labels.append("convex" if sgn[b] > 0 else "concave")
    breaks = [(lo + hi) // 2 for lo, hi in anchors]
    return ShapeSpec(convex=_pieces_from_breaks(n, breaks, labels), inflection_anchors=anchors)
