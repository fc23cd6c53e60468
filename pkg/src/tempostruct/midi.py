"""Standard MIDI File (format 0/1) parsing, writing, and corpus indexing.

Only the information the piano-roll pipeline needs is kept: note events on a
tick grid, the file's resolution, and its (single) time signature.  Tempo,
velocity and expression data are ignored on input and fixed on output.
"""

from __future__ import annotations

import re
import struct
import warnings
from dataclasses import dataclass, field
from pathlib import Path

_HEADER_MAGIC = b"MThd"
_TRACK_MAGIC = b"MTrk"

EXPORT_VELOCITY = 90  # dynamics are not modelled
DEFAULT_TIME_SIGNATURE = (4, 4)

MIDI_EXTENSIONS = {".mid", ".midi"}


class MidiError(ValueError):
    """Base class for unreadable or unsupported MIDI input."""


class MalformedHeader(MidiError):
    """Bad magic, bad chunk length, or a truncated file."""


class UnsupportedFormat(MidiError):
    """SMF type 2 or SMPTE time division."""


class MeterChange(MidiError):
    """A second, different time-signature event appeared mid-piece."""


class EmptyCorpus(ValueError):
    """A corpus directory contained no parseable MIDI file."""


class DanglingNoteOn(UserWarning):
    """A note-on was never closed; the note is ended at end of track."""


@dataclass(frozen=True, order=True)
class NoteEvent:
    """One note: MIDI pitch, onset and duration in ticks, source track."""

    pitch: int
    onset: int
    duration: int
    track: int

    def __post_init__(self):
        if not 0 <= self.pitch <= 127:
            raise ValueError(f"pitch {self.pitch} outside 0..127")
        if self.onset < 0:
            raise ValueError(f"negative onset {self.onset}")
        if self.duration <= 0:
            raise ValueError(f"non-positive duration {self.duration}")
        if self.track < 0:
            raise ValueError(f"negative track {self.track}")

    @property
    def end(self) -> int:
        return self.onset + self.duration


@dataclass
class Score:
    """A parsed piece: note events plus resolution and meter."""

    notes: list[NoteEvent]
    ticks_per_quarter: int
    time_signature: tuple[int, int] = DEFAULT_TIME_SIGNATURE
    title: str = ""
    style_tag: str = ""

    def __post_init__(self):
        if self.ticks_per_quarter <= 0:
            raise ValueError("ticks_per_quarter must be positive")
        num, den = self.time_signature
        if num < 1 or den < 1 or den & (den - 1):
            raise ValueError(f"bad time signature {self.time_signature}")
        self.notes = sorted(self.notes, key=lambda n: (n.onset, n.track, n.pitch))

    @property
    def track_ids(self) -> list[int]:
        return sorted({n.track for n in self.notes})


@dataclass(frozen=True)
class CorpusEntry:
    path: str
    style_tag: str
    time_signature: tuple[int, int]


@dataclass
class CorpusIndex:
    """Every parseable file in a corpus directory, grouped by style stratum."""

    entries: list[CorpusEntry]
    counts: dict[str, int]
    skipped: list[tuple[str, str]] = field(default_factory=list)


class _Reader:
    """Byte cursor over an SMF buffer; overruns raise MalformedHeader."""

    __slots__ = ("data", "pos", "end")

    def __init__(self, data: bytes, pos: int = 0, end: int | None = None):
        self.data = data
        self.pos = pos
        self.end = len(data) if end is None else end

    def remaining(self) -> int:
        return self.end - self.pos

    def take(self, n: int) -> bytes:
        if self.remaining() < n:
            raise MalformedHeader("truncated file")
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def u8(self) -> int:
        if self.pos >= self.end:
            raise MalformedHeader("truncated file")
        value = self.data[self.pos]
        self.pos += 1
        return value

    def peek(self) -> int:
        if self.pos >= self.end:
            raise MalformedHeader("truncated file")
        return self.data[self.pos]

    def u16(self) -> int:
        return struct.unpack(">H", self.take(2))[0]

    def u32(self) -> int:
        return struct.unpack(">I", self.take(4))[0]

    def vlq(self) -> int:
        """Variable-length quantity, big-endian 7-bit groups."""
        value = 0
        for _ in range(4):
            byte = self.u8()
            value = (value << 7) | (byte & 0x7F)
            if not byte & 0x80:
                return value
        raise MalformedHeader("variable-length quantity longer than 4 bytes")


def encode_vlq(value: int) -> bytes:
    """Encode a non-negative integer as an SMF variable-length quantity."""
    if value < 0:
        raise ValueError("VLQ values are non-negative")
    groups = [value & 0x7F]
    value >>= 7
    while value:
        groups.append((value & 0x7F) | 0x80)
        value >>= 7
    return bytes(reversed(groups))


# Number of data bytes per channel-message status nibble.
_CHANNEL_DATA_BYTES = {0x80: 2, 0x90: 2, 0xA0: 2, 0xB0: 2, 0xC0: 1, 0xD0: 1, 0xE0: 2}


def _parse_track(reader: _Reader):
    """Parse one MTrk body.

    Returns (raw notes as (pitch, onset, duration) triples, time-signature
    events, first track-name string or None).
    """
    notes: list[tuple[int, int, int]] = []
    signatures: list[tuple[int, int]] = []
    name: str | None = None
    open_notes: dict[tuple[int, int], list[int]] = {}
    tick = 0
    running_status: int | None = None

    while reader.remaining() > 0:
        tick += reader.vlq()
        status = reader.peek()
        if status == 0xFF:
            reader.u8()
            meta_type = reader.u8()
            payload = reader.take(reader.vlq())
            if meta_type == 0x2F:  # end of track
                break
            if meta_type == 0x58 and len(payload) >= 2:
                signatures.append((payload[0], 1 << payload[1]))
            elif meta_type == 0x03 and name is None:
                name = payload.decode("latin-1", errors="replace")
        elif status in (0xF0, 0xF7):  # SysEx, skipped
            reader.u8()
            reader.take(reader.vlq())
            running_status = None
        else:
            if status & 0x80:
                reader.u8()
                running_status = status
            elif running_status is None:
                raise MalformedHeader("data byte with no running status")
            else:
                status = running_status
            kind = status & 0xF0
            if kind not in _CHANNEL_DATA_BYTES:
                raise MalformedHeader(f"unexpected status byte 0x{status:02x}")
            data = reader.take(_CHANNEL_DATA_BYTES[kind])
            channel = status & 0x0F
            if kind == 0x90 and data[1] > 0:
                open_notes.setdefault((channel, data[0]), []).append(tick)
            elif kind == 0x80 or (kind == 0x90 and data[1] == 0):
                stack = open_notes.get((channel, data[0]))
                if stack:
                    onset = stack.pop(0)
                    notes.append((data[0], onset, max(1, tick - onset)))
                # a stray note-off is ignored

    for (_, pitch), onsets in open_notes.items():
        for onset in onsets:
            warnings.warn(
                f"note-on pitch {pitch} at tick {onset} never closed; "
                f"ending it at track end",
                DanglingNoteOn,
            )
            notes.append((pitch, onset, max(1, tick - onset)))
    return notes, signatures, name


def parse_midi(data: bytes) -> Score:
    """Parse SMF format 0/1 bytes into a Score.

    Note-on with velocity 0 counts as note-off.  The first time-signature
    event is kept; a later, different one raises MeterChange.  Tempo and all
    other meta/channel data are ignored.
    """
    reader = _Reader(data)
    if reader.take(4) != _HEADER_MAGIC:
        raise MalformedHeader("missing MThd magic")
    header_len = reader.u32()
    if header_len < 6:
        raise MalformedHeader(f"header length {header_len} < 6")
    smf_format = reader.u16()
    declared_tracks = reader.u16()
    division = reader.u16()
    reader.take(header_len - 6)
    if smf_format not in (0, 1):
        raise UnsupportedFormat(f"SMF type {smf_format} is not supported")
    if division & 0x8000:
        raise UnsupportedFormat("SMPTE time division is not supported")
    if division == 0:
        raise MalformedHeader("zero ticks per quarter note")

    chunk_notes: list[list[tuple[int, int, int]]] = []
    time_signature: tuple[int, int] | None = None
    title: str | None = None
    while reader.remaining() >= 8 and len(chunk_notes) < declared_tracks:
        magic = reader.take(4)
        length = reader.u32()
        if magic != _TRACK_MAGIC:
            reader.take(length)  # alien chunk, skip
            continue
        if reader.remaining() < length:
            raise MalformedHeader("truncated track chunk")
        body = _Reader(reader.data, reader.pos, reader.pos + length)
        notes, signatures, name = _parse_track(body)
        reader.pos += length
        chunk_notes.append(notes)
        for signature in signatures:
            if time_signature is None:
                time_signature = signature
            elif signature != time_signature:
                raise MeterChange(
                    f"time signature changes from {time_signature} to {signature}"
                )
        if title is None and name:
            title = name
    if not chunk_notes:
        raise MalformedHeader("no track chunks")

    # Note-bearing chunks are renumbered 0..K-1 so write/parse round-trips.
    events = []
    rank = 0
    for notes in chunk_notes:
        if not notes:
            continue
        events.extend(
            NoteEvent(pitch, onset, duration, rank) for pitch, onset, duration in notes
        )
        rank += 1
    return Score(
        notes=events,
        ticks_per_quarter=division,
        time_signature=time_signature or DEFAULT_TIME_SIGNATURE,
        title=title or "",
    )


def _track_chunk(body: bytes) -> bytes:
    return _TRACK_MAGIC + struct.pack(">I", len(body)) + body


def _conductor_track(score: Score) -> bytes:
    num, den = score.time_signature
    body = bytearray()
    if score.title:
        name = score.title.encode("latin-1", errors="replace")
        body += b"\x00\xff\x03" + encode_vlq(len(name)) + name
    body += b"\x00\xff\x58\x04" + bytes([num, den.bit_length() - 1, 24, 8])
    body += b"\x00\xff\x2f\x00"
    return _track_chunk(bytes(body))


def _note_track(notes: list[NoteEvent]) -> bytes:
    # (tick, off-before-on, pitch) ordering keeps re-parsing unambiguous when
    # a note ends exactly where the next one starts.
    events = []
    for note in notes:
        events.append((note.onset, 1, note.pitch, bytes([0x90, note.pitch, EXPORT_VELOCITY])))
        events.append((note.end, 0, note.pitch, bytes([0x80, note.pitch, 0])))
    events.sort(key=lambda e: (e[0], e[1], e[2]))
    body = bytearray()
    tick = 0
    for when, _, _, message in events:
        body += encode_vlq(when - tick) + message
        tick = when
    body += b"\x00\xff\x2f\x00"
    return _track_chunk(bytes(body))


def write_midi(score: Score) -> bytes:
    """Emit SMF type 1: a conductor track plus one track per NoteEvent.track.

    Tracks are written in ascending track-id order, so re-parsing yields the
    same notes as long as track ids are contiguous from 0 (which parse_midi
    guarantees).
    """
    by_track: dict[int, list[NoteEvent]] = {}
    for note in score.notes:
        by_track.setdefault(note.track, []).append(note)
    chunks = [_conductor_track(score)]
    chunks.extend(_note_track(by_track[t]) for t in sorted(by_track))
    header = _HEADER_MAGIC + struct.pack(">IHHH", 6, 1, len(chunks), score.ticks_per_quarter)
    return header + b"".join(chunks)


def style_from_filename(path: str | Path) -> str:
    """Corpus stratum label: the filename stem up to the first digit."""
    stem = Path(path).stem
    prefix = re.match(r"\D*", stem).group(0)
    return prefix or stem


def read_score(path: str | Path, style_tag: str | None = None) -> Score:
    """Parse one MIDI file, attaching a style tag (derived if not given)."""
    score = parse_midi(Path(path).read_bytes())
    score.style_tag = style_from_filename(path) if style_tag is None else style_tag
    return score


def index_corpus(directory: str | Path) -> CorpusIndex:
    """Index every parseable MIDI file directly inside a directory.

    Unparseable files become skip records instead of errors; an empty result
    raises EmptyCorpus.
    """
    directory = Path(directory)
    if not directory.is_dir():
        raise EmptyCorpus(f"{directory} is not a directory")
    entries: list[CorpusEntry] = []
    skipped: list[tuple[str, str]] = []
    counts: dict[str, int] = {}
    for path in sorted(directory.iterdir()):
        if path.suffix.lower() not in MIDI_EXTENSIONS or not path.is_file():
            continue
        try:
            score = parse_midi(path.read_bytes())
        except (MidiError, OSError) as exc:
            skipped.append((str(path), f"{type(exc).__name__}: {exc}"))
            continue
        style = style_from_filename(path)
        entries.append(CorpusEntry(str(path), style, score.time_signature))
        counts[style] = counts.get(style, 0) + 1
    if not entries:
        raise EmptyCorpus(f"no parseable MIDI files in {directory}")
    return CorpusIndex(entries=entries, counts=counts, skipped=skipped)


def write_skip_report(index: CorpusIndex, path: str | Path) -> None:
    """One 'path<TAB>reason' line per skipped file."""
    lines = [f"{p}\t{reason}" for p, reason in index.skipped]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""))
