"""Shared conversation histories: observable archives and access-moded attachments.

An :class:`Archive` is an ordered, observable log of (message, response)
pairs. States and triggers bind to archives through
:class:`HistoryAttachment` records: each owner attaches to at most one
archive, with an access mode (read / write / read-write), and triggers may
only attach read-only. Every mutation of an archive notifies all registered
observers exactly once, synchronously, before the mutating call returns.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum

from mfa.errors import (
    MultiAttachError,
    PairNotFoundError,
    ReadOnlyError,
    TriggerWriteError,
    WriteOnlyError,
)


class AccessMode(str, Enum):
    """How an owner may interact with its archive."""

    READ = "r"
    WRITE = "w"
    READ_WRITE = "rw"

    @property
    def can_read(self) -> bool:
        return self in (AccessMode.READ, AccessMode.READ_WRITE)

    @property
    def can_write(self) -> bool:
        return self in (AccessMode.WRITE, AccessMode.READ_WRITE)


@dataclass(frozen=True)
class AttachmentDecl:
    """Declarative binding of a state or trigger to an archive (one edge of the
    bipartite attachment graph)."""

    archive: str
    mode: AccessMode


@dataclass(frozen=True)
class ExchangePair:
    """One archived (message, response) exchange."""

    input: str
    output: str
    origin: str
    seq: int


@dataclass(frozen=True)
class ArchiveEvent:
    """Notification sent to observers on every archive mutation."""

    kind: str  # "added" | "removed"
    archive: str
    seq: int
    pair: ExchangePair | None = None


class Archive:
    """Ordered observable log of exchanges.

    Sequence numbers are archive-global, start at 1 and are never reused,
    so removal notifications are unambiguous.
    """

    def __init__(self, archive_id: str):
        self.id = archive_id
        self._entries: list[ExchangePair] = []
        self._observers: list[object] = []
        self._next_seq = 1

    def __len__(self) -> int:
        return len(self._entries)

    def subscribe(self, observer: object) -> None:
        """Register an observer; it must expose ``update(event)``."""
        if observer not in self._observers:
            self._observers.append(observer)

    def pairs(self) -> list[ExchangePair]:
        """Snapshot of all entries in seq order (later mutations do not leak)."""
        return list(self._entries)

    def append(self, input_message: str, output_message: str, origin: str) -> ExchangePair:
        """Append a pair with the next seq and notify observers once."""
        pair = ExchangePair(input_message, output_message, origin, self._next_seq)
        self._next_seq += 1
        self._entries.append(pair)
        self._notify(ArchiveEvent("added", self.id, pair.seq, pair))
        return pair

    def remove(self, seq: int) -> None:
        """Remove the pair with the given seq and notify observers once."""
        for i, pair in enumerate(self._entries):
            if pair.seq == seq:
                del self._entries[i]
                self._notify(ArchiveEvent("removed", self.id, seq, pair))
                return
        raise PairNotFoundError(f"archive {self.id!r} has no pair with seq {seq}")

    def _notify(self, event: ArchiveEvent) -> None:
        for observer in self._observers:
            observer.update(event)


@dataclass
class HistoryAttachment:
    """Live binding of one owner (state or trigger id) to one archive.

    Observes its archive: ``notifications`` counts every event delivered,
    including those caused by the owner's own writes.
    """

    owner: str
    archive: Archive
    mode: AccessMode
    notifications: int = 0
    events: list[ArchiveEvent] = field(default_factory=list)

    def update(self, event: ArchiveEvent) -> None:
        self.notifications += 1
        self.events.append(event)


class HistoryHub:
    """Per-session registry of archives and attachments.

    Enforces the attachment rules: at most one attachment per owner across
    all archives, and triggers attach read-only.
    """

    def __init__(self):
        self.archives: dict[str, Archive] = {}
        self.attachments: dict[str, HistoryAttachment] = {}

    def create_archive(self, archive_id: str) -> Archive:
        archive = self.archives.get(archive_id)
        if archive is None:
            archive = Archive(archive_id)
            self.archives[archive_id] = archive
        return archive

    def attach(
        self,
        owner: str,
        archive: Archive | str,
        mode: AccessMode,
        *,
        trigger: bool = False,
    ) -> HistoryAttachment:
        """Bind ``owner`` to ``archive``; the owner becomes an observer."""
        if owner in self.attachments:
            raise MultiAttachError(f"{owner!r} is already attached to an archive")
        if trigger and mode is not AccessMode.READ:
            raise TriggerWriteError(
                f"trigger {owner!r} may only attach read-only, got mode {mode.value!r}"
            )
        if isinstance(archive, str):
            archive = self.create_archive(archive)
        attachment = HistoryAttachment(owner=owner, archive=archive, mode=mode)
        archive.subscribe(attachment)
        self.attachments[owner] = attachment
        return attachment


def attach(
    hub: HistoryHub,
    owner: str,
    archive: Archive | str,
    mode: AccessMode,
    *,
    trigger: bool = False,
) -> HistoryAttachment:
    """Functional form of :meth:`HistoryHub.attach`."""
    return hub.attach(owner, archive, mode, trigger=trigger)


def add_pair(attachment: HistoryAttachment, input_message: str, output_message: str) -> ExchangePair:
    """Append an exchange through a writable attachment."""
    if not attachment.mode.can_write:
        raise ReadOnlyError(f"{attachment.owner!r} holds a read-only attachment")
    return attachment.archive.append(input_message, output_message, attachment.owner)


def read_pairs(attachment: HistoryAttachment) -> list[ExchangePair]:
    """Snapshot of the attached archive through a readable attachment."""
    if not attachment.mode.can_read:
        raise WriteOnlyError(f"{attachment.owner!r} holds a write-only attachment")
    return attachment.archive.pairs()


def remove_pair(archive: Archive, seq: int) -> None:
    """Remove one pair by seq; observers are notified of the removal."""
    archive.remove(seq)


def export_jsonl(archive: Archive) -> str:
    """Serialize the archive as line-delimited JSON records for golden files."""
    lines = []
    for pair in archive.pairs():
        record = {"seq": pair.seq, "origin": pair.origin, "input": pair.input, "output": pair.output}
        lines.append(json.dumps(record, sort_keys=True, ensure_ascii=False, separators=(",", ":")))
    return "".join(line + "\n" for line in lines)
