"""Engineered temporal-structure inputs: conclusion count-down and meter
markers, appended after the one-hot base columns."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .encoding import EncodedSequence, QuantizedSong


class AllRest(ValueError):
    """The melody never sounds, so there is no last-note onset."""


@dataclass(frozen=True)
class FeatureConfig:
    """Which feature columns to append and the meter grid they assume."""

    use_countdown: bool = False
    use_beat_marker: bool = False
    use_subbeat_marker: bool = False
    beats_per_bar: int = 4
    steps_per_beat: int = 4

    def __post_init__(self):
        if self.beats_per_bar < 1 or self.steps_per_beat < 1:
            raise ValueError("meter grid sizes must be at least 1")

    @property
    def bar_len(self) -> int:
        return self.beats_per_bar * self.steps_per_beat

    @property
    def width(self) -> int:
        return (
            int(self.use_countdown)
            + self.use_beat_marker * self.beats_per_bar
            + self.use_subbeat_marker * self.steps_per_beat
        )

    def to_dict(self) -> dict:
        return {
            "countdown": self.use_countdown,
            "beat_marker": self.use_beat_marker,
            "subbeat_marker": self.use_subbeat_marker,
            "beats_per_bar": self.beats_per_bar,
            "steps_per_beat": self.steps_per_beat,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "FeatureConfig":
        return cls(
            use_countdown=bool(data.get("countdown", False)),
            use_beat_marker=bool(data.get("beat_marker", False)),
            use_subbeat_marker=bool(data.get("subbeat_marker", False)),
            beats_per_bar=int(data.get("beats_per_bar", 4)),
            steps_per_beat=int(data.get("steps_per_beat", 4)),
        )


def last_note_onset(song: QuantizedSong) -> int:
    """First frame of the final contiguous non-rest melody segment."""
    t = len(song) - 1
    while t >= 0 and song.melody[t] is None:
        t -= 1
    if t < 0:
        raise AllRest("melody is silent throughout")
    while t > 0 and song.melody[t - 1] is not None:
        t -= 1
    return t


def countdown(total: int, t_last: int) -> np.ndarray:
    """Normalized count-down: 1 at the start, 0 from the last-note onset on."""
    if not 0 <= t_last < total:
        raise ValueError(f"t_last {t_last} outside 0..{total - 1}")
    values = np.zeros(total, dtype=np.float32)
    if t_last > 0:
        t = np.arange(t_last + 1)
        values[: t_last + 1] = (t_last - t) / t_last
    return values


def detect_anacrusis(total: int, bar_len: int) -> int:
    """Pickup length heuristic: total length modulo the bar length."""
    if bar_len < 1:
        raise ValueError("bar_len must be at least 1")
    return total % bar_len


def meter_markers(total: int, anacrusis: int, cfg: FeatureConfig) -> np.ndarray:
    """Beat / sub-beat one-hot columns, all-zero before the first downbeat."""
    if not 0 <= anacrusis < cfg.bar_len:
        raise ValueError(f"anacrusis {anacrusis} outside 0..{cfg.bar_len - 1}")
    width = cfg.use_beat_marker * cfg.beats_per_bar + cfg.use_subbeat_marker * cfg.steps_per_beat
    markers = np.zeros((total, width), dtype=np.float32)
    if width == 0 or total <= anacrusis:
        return markers
    u = np.arange(total - anacrusis)
    col = 0
    if cfg.use_beat_marker:
        beat = (u // cfg.steps_per_beat) % cfg.beats_per_bar
        markers[anacrusis + u, col + beat] = 1.0
        col += cfg.beats_per_bar
    if cfg.use_subbeat_marker:
        sub = u % cfg.steps_per_beat
        markers[anacrusis + u, col + sub] = 1.0
    return markers


def augment(seq: EncodedSequence, song: QuantizedSong, cfg: FeatureConfig) -> EncodedSequence:
    """Append the configured feature columns to an encoded sequence.

    Features are computed over the real (masked-true) frames only; padding
    stays all-zero. Base columns, classes and mask are untouched.
    """
    if cfg.width == 0:
        return seq
    real = seq.real_length
    if not seq.mask[:real].all():
        raise ValueError("mask must be a true-prefix to augment")
    columns = []
    if cfg.use_countdown:
        columns.append(countdown(real, last_note_onset(song))[:, None])
    anacrusis = detect_anacrusis(real, cfg.bar_len)
    if cfg.use_beat_marker or cfg.use_subbeat_marker:
        columns.append(meter_markers(real, anacrusis, cfg))
    features = np.zeros((len(seq), cfg.width), dtype=np.float32)
    features[:real] = np.hstack(columns) if len(columns) > 1 else columns[0]
    return replace(
        seq,
        frames=np.hstack([seq.frames, features]).astype(np.float32),
        anacrusis_offset=anacrusis,
    )
