"""Triad classification and the corpus-derived chord dictionary.

Harmony frames are labelled by exact pitch-class-set matching against the 24
major/minor triad templates; anything else (including partial triads and
sevenths) is Unknown.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

MAJOR = "maj"
MINOR = "min"

_TEMPLATES = {MAJOR: frozenset({0, 4, 7}), MINOR: frozenset({0, 3, 7})}


class NoChords(ValueError):
    """No harmony frame in the corpus classified to a triad."""


class UnknownNotRealizable(ValueError):
    """The Unknown chord class has no pitch realization."""


@dataclass(frozen=True)
class ChordLabel:
    """A (root pitch class, quality) pair, or the Unknown chord."""

    root: int | None
    quality: str | None

    def __post_init__(self):
        if (self.root is None) != (self.quality is None):
            raise ValueError("root and quality must both be set or both be None")
        if self.root is not None and not 0 <= self.root <= 11:
            raise ValueError(f"root {self.root} outside 0..11")
        if self.quality is not None and self.quality not in (MAJOR, MINOR):
            raise ValueError(f"quality must be {MAJOR!r} or {MINOR!r}")

    @property
    def is_unknown(self) -> bool:
        return self.root is None

    def __str__(self) -> str:
        return "unknown" if self.is_unknown else f"{self.root}:{self.quality}"

    @classmethod
    def parse(cls, text: str) -> "ChordLabel":
        if text == "unknown":
            return UNKNOWN
        root, _, quality = text.partition(":")
        return cls(int(root), quality)


UNKNOWN = ChordLabel(None, None)


def classify_chord(pitches: Iterable[int]) -> ChordLabel:
    """Classify a set of sounding MIDI pitches as a major/minor triad.

    Reduction to pitch classes makes the result invariant to octave and
    duplication. Non-triads (and the empty set) map to Unknown.
    """
    classes = frozenset(p % 12 for p in pitches)
    if len(classes) != 3:
        return UNKNOWN
    for root in classes:
        relative = frozenset((p - root) % 12 for p in classes)
        for quality, template in _TEMPLATES.items():
            if relative == template:
                return ChordLabel(root, quality)
    return UNKNOWN


def realize_chord(label: ChordLabel, register: int = 3) -> set[int]:
    """Root-position triad with its root in the given octave.

    classify_chord(realize_chord(label)) == label for every non-Unknown label.
    """
    if label.is_unknown:
        raise UnknownNotRealizable("Unknown has no voicing")
    root = 12 * (register + 1) + label.root
    third = 4 if label.quality == MAJOR else 3
    return {root, root + third, root + 7}


@dataclass(frozen=True)
class ChordDictionary:
    """Ordered chord classes observed in a training corpus, Unknown last."""

    labels: tuple[ChordLabel, ...]

    def __post_init__(self):
        if len(set(self.labels)) != len(self.labels):
            raise ValueError("duplicate chord labels")
        if not self.labels or not self.labels[-1].is_unknown:
            raise ValueError("Unknown must be the final class")
        if any(label.is_unknown for label in self.labels[:-1]):
            raise ValueError("Unknown may only appear once, at the end")
        if len(self.labels) > 25:
            raise ValueError(f"{len(self.labels)} classes exceeds 24 triads + Unknown")

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def unknown_index(self) -> int:
        return len(self.labels) - 1

    def index_of(self, label: ChordLabel) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            return self.unknown_index

    def label_at(self, index: int) -> ChordLabel:
        return self.labels[index]

    def to_strings(self) -> list[str]:
        return [str(label) for label in self.labels]

    @classmethod
    def from_strings(cls, texts: Iterable[str]) -> "ChordDictionary":
        return cls(tuple(ChordLabel.parse(t) for t in texts))


def build_chord_dictionary(songs) -> ChordDictionary:
    """Collect distinct triads over all harmony frames, in first-appearance
    order, and append Unknown.

    `songs` are quantized songs exposing per-step harmony pitch sets.
    """
    seen: dict[ChordLabel, None] = {}
    for song in songs:
        for pitches in song.harmony:
            label = classify_chord(pitches)
            if not label.is_unknown and label not in seen:
                seen[label] = None
    if not seen:
        raise NoChords("no harmony frame classified to a triad")
    return ChordDictionary(tuple(seen) + (UNKNOWN,))
