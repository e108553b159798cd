"""Typological language similarity and the close/distant pair split.

Languages are represented by concatenated feature vectors (syntax, family,
geography blocks) with a per-feature presence mask, since typological
databases leave many features unknown. Distance between two languages is
cosine distance over the intersection of their present features; the
close/distant boundary is a percentile of all pairwise distances.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from itertools import combinations
from pathlib import Path
from typing import Iterable, Sequence


class LangSimError(ValueError):
    pass


class PairClass(str, Enum):
    CLOSE = "close"
    DISTANT = "distant"


@dataclass(frozen=True)
class TypologicalVector:
    """Per-language feature vector with a presence mask."""

    language: str
    features: tuple[float, ...]
    present: tuple[bool, ...]

    def __post_init__(self) -> None:
        if len(self.features) != len(self.present):
            raise LangSimError(
                f"{self.language}: features and mask lengths differ "
                f"({len(self.features)} vs {len(self.present)})"
            )
        if not any(self.present):
            raise LangSimError(f"{self.language}: no features present")

    @classmethod
    def from_raw(cls, language: str, values: Sequence[float | None]) -> "TypologicalVector":
        feats = tuple(0.0 if v is None else float(v) for v in values)
        mask = tuple(v is not None for v in values)
        return cls(language=language.lower(), features=feats, present=mask)


def l2_normalize(values: Sequence[float]) -> list[float]:
    """Scale a vector to unit Euclidean norm. Raises on the zero vector."""
    norm = math.sqrt(sum(x * x for x in values))
    if norm == 0.0:
        raise LangSimError("cannot normalize a zero vector")
    return [x / norm for x in values]


def cosine_distance(u: TypologicalVector, v: TypologicalVector) -> float:
    """1 - cos(u, v) over the shared present features; range [0, 2].

    Raises when the present-feature intersection is empty or either
    restricted vector is zero.
    """
    shared = [i for i in range(min(len(u.features), len(v.features)))
              if u.present[i] and v.present[i]]
    if not shared:
        raise LangSimError(
            f"no shared present features between {u.language} and {v.language}"
        )
    dot = 0.0
    norm_u = 0.0
    norm_v = 0.0
    for i in shared:
        a = u.features[i]
        b = v.features[i]
        dot += a * b
        norm_u += a * a
        norm_v += b * b
    if norm_u == 0.0 or norm_v == 0.0:
        raise LangSimError(
            f"zero vector over shared features ({u.language}, {v.language})"
        )
    cos = dot / (math.sqrt(norm_u) * math.sqrt(norm_v))
    # guard float drift so the [0, 2] contract holds exactly
    cos = max(-1.0, min(1.0, cos))
    return 1.0 - cos


def percentile_linear(values: Sequence[float], q: float) -> float:
    """Linear-interpolation percentile (inclusive convention).

    Interpolates from the nearer order statistic, matching
    numpy.percentile(..., method="linear") bit for bit.
    """
    if not values:
        raise LangSimError("percentile of empty sequence")
    if not 0.0 <= q <= 100.0:
        raise LangSimError(f"percentile out of range: {q}")
    xs = sorted(values)
    pos = (q / 100.0) * (len(xs) - 1)
    lo = math.floor(pos)
    hi = math.ceil(pos)
    if lo == hi:
        return xs[lo]
    t = pos - lo
    a, b = xs[lo], xs[hi]
    if t < 0.5:
        return a + (b - a) * t
    return b - (b - a) * (1.0 - t)


def _pair_key(a: str, b: str) -> tuple[str, str]:
    return (a, b) if a <= b else (b, a)


def pairwise_distances(
    vectors: Iterable[TypologicalVector],
) -> dict[tuple[str, str], float]:
    """All computable unordered pairwise distances, keyed by sorted ISO pair.

    Pairs with an empty present-feature intersection are skipped, per the
    missing-feature policy.
    """
    out: dict[tuple[str, str], float] = {}
    for u, v in combinations(sorted(vectors, key=lambda t: t.language), 2):
        try:
            out[_pair_key(u.language, v.language)] = cosine_distance(u, v)
        except LangSimError:
            continue
    return out


def close_threshold(vectors: Sequence[TypologicalVector], percentile: float = 10.0) -> float:
    """Percentile of all pairwise distances; the close/distant boundary."""
    if len(vectors) < 2:
        raise LangSimError("need at least 2 vectors to compute a threshold")
    dists = pairwise_distances(vectors)
    if not dists:
        raise LangSimError("no comparable vector pairs (empty feature intersections)")
    return percentile_linear(list(dists.values()), percentile)


@dataclass
class SimilaritySplit:
    """Close/distant classification of language pairs at threshold tau."""

    tau: float
    distances: dict[tuple[str, str], float] = field(default_factory=dict)

    @property
    def pairs_close(self) -> set[tuple[str, str]]:
        return {p for p, d in self.distances.items() if d <= self.tau}

    @property
    def pairs_distant(self) -> set[tuple[str, str]]:
        return {p for p, d in self.distances.items() if d > self.tau}

    def distance(self, a: str, b: str) -> float:
        key = _pair_key(a.lower(), b.lower())
        if key[0] == key[1]:
            return 0.0
        if key not in self.distances:
            raise LangSimError(f"pair not scored: {key[0]}/{key[1]}")
        return self.distances[key]

    def classify(self, a: str, b: str) -> PairClass:
        return classify_pair_distance(self.distance(a, b), self.tau)

    def classify_or_none(self, a: str, b: str) -> PairClass | None:
        try:
            return self.classify(a, b)
        except LangSimError:
            return None

    def is_close_or_none(self, a: str, b: str) -> bool | None:
        c = self.classify_or_none(a, b)
        return None if c is None else c is PairClass.CLOSE


def classify_pair_distance(distance: float, tau: float) -> PairClass:
    """Close iff distance is at or below the threshold."""
    return PairClass.CLOSE if distance <= tau else PairClass.DISTANT


def classify_pair(a: TypologicalVector, b: TypologicalVector, tau: float) -> PairClass:
    return classify_pair_distance(cosine_distance(a, b), tau)


def build_split(
    vectors: Sequence[TypologicalVector], percentile: float = 10.0
) -> SimilaritySplit:
    tau = close_threshold(vectors, percentile)
    return SimilaritySplit(tau=tau, distances=pairwise_distances(vectors))


def nearest_language(
    language: str, candidates: Iterable[str], split: SimilaritySplit
) -> tuple[str, float] | None:
    """Closest scored candidate; distance ties break lexicographically."""
    best: tuple[float, str] | None = None
    for cand in sorted(set(c.lower() for c in candidates)):
        try:
            d = split.distance(language, cand)
        except LangSimError:
            continue
        if best is None or (d, cand) < best:
            best = (d, cand)
    if best is None:
        return None
    return best[1], best[0]


@dataclass(frozen=True)
class TypologyTable:
    vectors: dict[str, TypologicalVector]
    blocks: dict[str, int]

    def __contains__(self, language: str) -> bool:
        return language.lower() in self.vectors

    def get(self, language: str) -> TypologicalVector | None:
        return self.vectors.get(language.lower())


def load_typology(path: str | Path) -> TypologyTable:
    """Load the typology file.

    Format: ``{"_blocks": {"syntax": n, "family": n, "geo": n},
    "<iso639-3>": {"features": [number|null, ...]}}``. Null marks a missing
    feature.
    """
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(raw, dict):
        raise LangSimError(f"{path}: typology file must be a JSON object")
    blocks = raw.pop("_blocks", {})
    vectors: dict[str, TypologicalVector] = {}
    for lang, entry in raw.items():
        if not isinstance(entry, dict) or "features" not in entry:
            raise LangSimError(f"{path}: bad entry for {lang!r}")
        vectors[lang.lower()] = TypologicalVector.from_raw(lang, entry["features"])
    if blocks:
        want = sum(int(n) for n in blocks.values())
        for vec in vectors.values():
            if len(vec.features) != want:
                raise LangSimError(
                    f"{vec.language}: {len(vec.features)} features, "
                    f"block header declares {want}"
                )
    return TypologyTable(vectors=vectors, blocks={k: int(v) for k, v in blocks.items()})
