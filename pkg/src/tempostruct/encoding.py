"""Sixteenth-note quantization and the one-hot frame encoding.

A frame holds a 35-way melody class (rest + chromatic G3..E6) and an H-way
harmony chord class, concatenated as one-hot columns. Feature columns, when
present, sit after the base block.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .chords import ChordDictionary, classify_chord, realize_chord
from .midi import Score

MELODY_LOW = 55  # G3
MELODY_HIGH = 88  # E6
MELODY_CLASSES = MELODY_HIGH - MELODY_LOW + 2  # 34 pitches + rest = 35
REST_CLASS = 0

DEFAULT_CHUNK_LEN = 128


class EmptyMelody(ValueError):
    """The melody track contains no notes."""


class ZeroResolution(ValueError):
    """ticks_per_quarter too small to form a sixteenth-note grid."""


class PitchOutOfRange(ValueError):
    """A melody pitch escaped the encodable range (corrupted input)."""


class InvalidFrame(ValueError):
    """A frame violates the one-hot invariant."""


class DimensionMismatch(ValueError):
    """Sequences of different widths cannot share a batch."""


@dataclass
class QuantizedSong:
    """Per-step melody state (pitch or None) and harmony pitch sets."""

    melody: list[int | None]
    harmony: list[frozenset[int]]
    time_signature: tuple[int, int] = (4, 4)
    style_tag: str = ""

    def __post_init__(self):
        if len(self.melody) != len(self.harmony):
            raise ValueError("melody/harmony length mismatch")
        if not self.melody:
            raise ValueError("a quantized song needs at least one step")

    def __len__(self) -> int:
        return len(self.melody)


@dataclass
class EncodedSequence:
    """T x D frame matrix plus per-frame class indices and a validity mask.

    Columns 0..34 are the melody one-hot, the next H columns the harmony
    one-hot; columns >= base_dim are appended feature columns. Padded frames
    are all-zero with mask False.
    """

    frames: np.ndarray
    melody_classes: np.ndarray
    harmony_classes: np.ndarray
    mask: np.ndarray
    base_dim: int
    anacrusis_offset: int | None = None

    def __len__(self) -> int:
        return self.frames.shape[0]

    @property
    def dim(self) -> int:
        return self.frames.shape[1]

    @property
    def feature_dim(self) -> int:
        return self.dim - self.base_dim

    @property
    def harmony_dim(self) -> int:
        return self.base_dim - MELODY_CLASSES

    @property
    def real_length(self) -> int:
        return int(self.mask.sum())


@dataclass
class Batch:
    """One chunk across B lanes, targets shifted one frame ahead."""

    inputs: np.ndarray  # (chunk_len, B, D) float32
    melody_targets: np.ndarray  # (chunk_len, B) int32
    harmony_targets: np.ndarray  # (chunk_len, B) int32
    mask: np.ndarray  # (chunk_len, B) bool
    carryover: np.ndarray  # (B,) bool


def select_tracks(score: Score) -> tuple[int, set[int]]:
    """Pick the melody track (highest mean pitch) and the harmony tracks."""
    sums: dict[int, list[int]] = {}
    for note in score.notes:
        sums.setdefault(note.track, [0, 0])
        sums[note.track][0] += note.pitch
        sums[note.track][1] += 1
    if not sums:
        raise EmptyMelody("score has no notes")
    melody = max(sums, key=lambda t: sums[t][0] / sums[t][1])
    return melody, set(sums) - {melody}


def _fold_into_range(pitch: int) -> int:
    folded = pitch
    while folded < MELODY_LOW:
        folded += 12
    while folded > MELODY_HIGH:
        folded -= 12
    return folded


def quantize(
    score: Score,
    melody_track: int | None = None,
    harmony_tracks: set[int] | None = None,
) -> QuantizedSong:
    """Sample a score onto a sixteenth-note grid (ticks_per_quarter / 4).

    A pitch sounds in a frame when its note overlaps the frame by at least
    half a step. Overlapping melody notes resolve to the highest pitch;
    out-of-range melody pitches are folded into range by octaves.
    """
    tpq = score.ticks_per_quarter
    if tpq < 4:
        raise ZeroResolution(f"ticks_per_quarter {tpq} cannot carry a sixteenth grid")
    if melody_track is None or harmony_tracks is None:
        auto_melody, auto_harmony = select_tracks(score)
        melody_track = auto_melody if melody_track is None else melody_track
        harmony_tracks = auto_harmony if harmony_tracks is None else harmony_tracks

    melody_notes = [n for n in score.notes if n.track == melody_track]
    harmony_notes = [n for n in score.notes if n.track in harmony_tracks]
    if not melody_notes:
        raise EmptyMelody(f"no notes on melody track {melody_track}")

    last_end = max(n.end for n in score.notes)
    # Work in quarter-tick units so the half-step overlap test stays integral
    # even when tpq is not divisible by 4.
    total = (4 * last_end + tpq - 1) // tpq

    def sounding(notes: list, frame: int) -> list[int]:
        lo, hi = frame * tpq, (frame + 1) * tpq
        out = []
        for n in notes:
            overlap = min(4 * n.end, hi) - max(4 * n.onset, lo)
            if 2 * overlap >= tpq:
                out.append(n.pitch)
        return out

    melody: list[int | None] = []
    harmony: list[frozenset[int]] = []
    warned = False
    for frame in range(total):
        pitches = sounding(melody_notes, frame)
        if pitches:
            pitch = max(pitches)
            if not MELODY_LOW <= pitch <= MELODY_HIGH:
                if not warned:
                    warnings.warn(
                        f"melody pitch {pitch} outside {MELODY_LOW}..{MELODY_HIGH}; "
                        f"folding by octaves",
                        stacklevel=2,
                    )
                    warned = True
                pitch = _fold_into_range(pitch)
            melody.append(pitch)
        else:
            melody.append(None)
        harmony.append(frozenset(sounding(harmony_notes, frame)))
    return QuantizedSong(melody, harmony, score.time_signature, score.style_tag)


def melody_class(pitch: int | None) -> int:
    if pitch is None:
        return REST_CLASS
    if not MELODY_LOW <= pitch <= MELODY_HIGH:
        raise PitchOutOfRange(f"pitch {pitch} outside {MELODY_LOW}..{MELODY_HIGH}")
    return pitch - MELODY_LOW + 1


def encode_song(song: QuantizedSong, dictionary: ChordDictionary) -> EncodedSequence:
    """One-hot encode a quantized song against a chord dictionary."""
    steps = len(song)
    base_dim = MELODY_CLASSES + len(dictionary)
    frames = np.zeros((steps, base_dim), dtype=np.float32)
    mel = np.zeros(steps, dtype=np.int32)
    harm = np.zeros(steps, dtype=np.int32)
    for t in range(steps):
        m = melody_class(song.melody[t])
        h = dictionary.index_of(classify_chord(song.harmony[t]))
        mel[t] = m
        harm[t] = h
        frames[t, m] = 1.0
        frames[t, MELODY_CLASSES + h] = 1.0
    return EncodedSequence(
        frames=frames,
        melody_classes=mel,
        harmony_classes=harm,
        mask=np.ones(steps, dtype=bool),
        base_dim=base_dim,
    )


def _one_hot_index(row: np.ndarray, what: str) -> int:
    hot = np.flatnonzero(row == 1.0)
    if hot.size != 1 or np.count_nonzero(row) != 1:
        raise InvalidFrame(f"{what} block is not one-hot")
    return int(hot[0])


def decode_sequence(
    seq: EncodedSequence,
    dictionary: ChordDictionary,
    register: int = 3,
    time_signature: tuple[int, int] = (4, 4),
) -> QuantizedSong:
    """Invert encode_song up to harmony voicing (Unknown becomes silence)."""
    melody: list[int | None] = []
    harmony: list[frozenset[int]] = []
    for t in range(len(seq)):
        if not seq.mask[t]:
            continue
        row = seq.frames[t]
        m = _one_hot_index(row[:MELODY_CLASSES], "melody")
        h = _one_hot_index(row[MELODY_CLASSES : seq.base_dim], "harmony")
        melody.append(None if m == REST_CLASS else MELODY_LOW + m - 1)
        label = dictionary.label_at(h)
        harmony.append(
            frozenset() if label.is_unknown else frozenset(realize_chord(label, register))
        )
    return QuantizedSong(melody, harmony, time_signature)


def pad_and_batch(
    seqs: list[EncodedSequence],
    chunk_len: int = DEFAULT_CHUNK_LEN,
    batch_size: int = 32,
    pad_supervised: bool = False,
) -> list[Batch]:
    """Zero-pad sequences to chunk multiples and slice them into batches.

    Sequences are grouped in order, batch_size lanes at a time; consecutive
    chunks of one song keep their lane, with carryover marking continuation.
    Targets at step t are the classes of frame t+1. By default positions with
    no real successor frame are masked out; with pad_supervised the padding
    itself becomes (rest, Unknown) targets and every position is supervised.
    """
    if chunk_len < 2:
        raise ValueError("chunk_len must be at least 2")
    if batch_size < 1:
        raise ValueError("batch_size must be positive")
    if not seqs:
        return []
    dim = seqs[0].dim
    base_dim = seqs[0].base_dim
    for seq in seqs:
        if seq.dim != dim or seq.base_dim != base_dim:
            raise DimensionMismatch(f"sequence width {seq.dim} != {dim}")
    unknown_class = base_dim - MELODY_CLASSES - 1

    batches: list[Batch] = []
    for start in range(0, len(seqs), batch_size):
        group = seqs[start : start + batch_size]
        lanes = len(group)
        chunk_counts = [max(1, -(-len(s) // chunk_len)) for s in group]
        total = max(chunk_counts) * chunk_len
        inputs = np.zeros((total, lanes, dim), dtype=np.float32)
        mel = np.zeros((total, lanes), dtype=np.int32)
        harm = np.zeros((total, lanes), dtype=np.int32)
        mask = np.zeros((total, lanes), dtype=bool)
        for lane, seq in enumerate(group):
            steps = len(seq)
            inputs[:steps, lane] = seq.frames
            mel[: steps - 1, lane] = seq.melody_classes[1:]
            harm[: steps - 1, lane] = seq.harmony_classes[1:]
            if pad_supervised:
                padded = chunk_counts[lane] * chunk_len
                mel[steps - 1 : padded, lane] = REST_CLASS
                harm[steps - 1 : padded, lane] = unknown_class
                mask[:padded, lane] = True
            else:
                mask[: steps - 1, lane] = True
        for j in range(max(chunk_counts)):
            sl = slice(j * chunk_len, (j + 1) * chunk_len)
            carryover = np.array(
                [0 < j < chunk_counts[lane] for lane in range(lanes)], dtype=bool
            )
            batches.append(
                Batch(
                    inputs=inputs[sl],
                    melody_targets=mel[sl],
                    harmony_targets=harm[sl],
                    mask=mask[sl],
                    carryover=carryover,
                )
            )
    return batches


def dump_csv(seq: EncodedSequence, path: str | Path) -> None:
    """Debug dump: one frame per row, then class indices and mask."""
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(
            [f"d{i}" for i in range(seq.dim)] + ["melody_target", "harmony_target", "mask"]
        )
        for t in range(len(seq)):
            writer.writerow(
                [f"{v:g}" for v in seq.frames[t]]
                + [int(seq.melody_classes[t]), int(seq.harmony_classes[t]), int(seq.mask[t])]
            )
