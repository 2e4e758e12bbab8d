from __future__ import annotations

from dataclasses import dataclass, field

from .beacon import Beacon
from .ecc import GroupParams
from .wire import decode_report_body, encode_report_body


@dataclass
class PublishedReport:
    """A published contact list: nothing but (U, V) point pairs.

    ``report_id`` and ``published_at`` are assigned by the authority; both are
    None for a report that has not been submitted yet.
    """

    entries: list[Beacon] = field(default_factory=list)
    report_id: str | None = None
    published_at: int | None = None

    def __len__(self):
        return len(self.entries)

    def to_body(self) -> bytes:
        return encode_report_body(self.entries)

    @classmethod
    def from_body(cls, params: GroupParams, body: bytes, report_id=None, published_at=None):
        return cls(decode_report_body(params, body), report_id, published_at)
