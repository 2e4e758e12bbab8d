"""Report publication store: append-only log on disk, in-memory index, snapshot reads."""
from __future__ import annotations

import bisect
import functools
import hashlib
import logging
import os
import struct
import threading
import time
from dataclasses import dataclass
from pathlib import Path

from ..beacon import Beacon
from ..ecc import STANDARD_CURVES, TOY, GroupElement, GroupParams, InvalidPoint
from ..wire import DecodeError, MalformedEntry, decode_report_body, encode_report_body

logger = logging.getLogger(__name__)

DAY = 86_400
_REC_REPORT = 1
_REC_PURGE = 2


class ServiceError(Exception):
    code = "error"


class Unauthorized(ServiceError):
    code = "unauthorized"


class CurveMismatch(ServiceError):
    code = "curve-mismatch"


class InvalidCursor(ServiceError):
    code = "invalid-cursor"


@dataclass(frozen=True, eq=False)
class StoredReport:
    """Everything the server keeps about a report. There is deliberately no
    field for uploader identity, locations or contact timestamps."""

    report_id: str
    seq: int
    published_at: int
    body: bytes
    params: GroupParams

    @property
    def entry_count(self) -> int:
        return struct.unpack_from(">I", self.body)[0]

    @functools.cached_property
    def entries(self) -> list[Beacon]:
        return decode_report_body(self.params, self.body)


def _validate_body(params: GroupParams, body: bytes) -> None:
    if len(body) < 4:
        raise DecodeError("report body shorter than its count header")
    (count,) = struct.unpack_from(">I", body)
    psize = params.coord_bytes + 1
    if len(body) != 4 + 2 * psize * count:
        for other in (*STANDARD_CURVES, TOY):
            if other != params and len(body) == 4 + 2 * (other.coord_bytes + 1) * count:
                raise CurveMismatch(f"entries look like {other.curve_id.value}, "
                                    f"server runs {params.curve_id.value}")
        raise DecodeError(f"body length {len(body)} does not match {count} entries")
    from_bytes = GroupElement.from_bytes
    for i in range(count):
        off = 4 + 2 * psize * i
        try:
            from_bytes(params, body[off: off + psize])
            from_bytes(params, body[off + psize: off + 2 * psize])
        except InvalidPoint as exc:
            raise MalformedEntry(i, str(exc)) from None


class ReportStore:
    """Accepts reports from authorized uploaders and serves them by cursor.

    Cursors are report sequence numbers: ``fetch_reports(cursor)`` returns
    reports with ``seq > cursor``. Writers serialize on a lock; readers take a
    snapshot of the (copy-on-purge) report list and never block.
    """

    def __init__(self, params: GroupParams, *, tokens=(), retention_window: float = 14 * DAY,
                 log_path: str | os.PathLike | None = None, dedup_window: float = DAY,
                 fsync: bool = False, clock=time.time):
        self.params = params
        self.tokens = frozenset(tokens)
        self.retention_window = retention_window
        self.dedup_window = dedup_window
        self.clock = clock
        self._fsync = fsync
        self._lock = threading.Lock()
        # (reports, seqs); appended in place, replaced wholesale on purge
        self._snapshot: tuple[list[StoredReport], list[int]] = ([], [])
        self._dedup: dict[bytes, StoredReport] = {}
        self._next_seq = 1
        self._log = None
        if log_path is not None:
            path = Path(log_path)
            if path.exists():
                self._replay(path)
            self._log = open(path, "ab")

    def close(self):
        if self._log is not None:
            self._log.close()
            self._log = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    # -- log -------------------------------------------------------------------

    def _append(self, kind: int, payload: bytes) -> None:
        if self._log is None:
            return
        self._log.write(struct.pack(">IB", len(payload) + 1, kind) + payload)
        self._log.flush()
        if self._fsync:
            os.fsync(self._log.fileno())

    def _replay(self, path: Path) -> None:
        data = path.read_bytes()
        pos = 0
        while pos + 5 <= len(data):
            length, kind = struct.unpack_from(">IB", data, pos)
            end = pos + 4 + length
            if end > len(data):
                logger.warning("ignoring truncated record at end of %s", path)
                break
            payload = data[pos + 5: end]
            if kind == _REC_REPORT:
                seq, published_at, id_len = struct.unpack_from(">QQB", payload)
                report_id = payload[17:17 + id_len].decode()
                self._install(StoredReport(report_id, seq, published_at,
                                           payload[17 + id_len:], self.params))
            elif kind == _REC_PURGE:
                (cutoff,) = struct.unpack(">Q", payload)
                self._drop_before(cutoff)
            pos = end
        if pos < len(data) and pos + 5 > len(data):
            logger.warning("ignoring trailing bytes in %s", path)

    def _install(self, rec: StoredReport) -> None:
        reports, seqs = self._snapshot
        seqs.append(rec.seq)
        reports.append(rec)
        self._dedup[hashlib.sha256(rec.body).digest()] = rec
        self._next_seq = max(self._next_seq, rec.seq + 1)

    def _drop_before(self, cutoff: int) -> int:
        reports = self._snapshot[0]
        keep = [r for r in reports if r.published_at >= cutoff]
        removed = len(reports) - len(keep)
        if removed:
            self._snapshot = (keep, [r.seq for r in keep])
            self._dedup = {k: r for k, r in self._dedup.items() if r.published_at >= cutoff}
        return removed

    # -- API -------------------------------------------------------------------

    def submit_report(self, token: str | None, entries, now: int | None = None) -> str:
        """Store a report and return its id.

        ``entries`` is either a raw report body (``[u32 count][pairs]``) or an
        iterable of :class:`Beacon`. A byte-identical resubmission within the
        dedup window returns the original id.
        """
        if token is None or token not in self.tokens:
            raise Unauthorized("missing or unknown upload token")
        if isinstance(entries, (bytes, bytearray, memoryview)):
            body = bytes(entries)
        else:
            entries = list(entries)
            for i, e in enumerate(entries):
                if not isinstance(e, Beacon):
                    raise MalformedEntry(i, "not a beacon")
                if e.params != self.params:
                    raise CurveMismatch(f"entry {i} is on {e.params.curve_id.value}")
            body = encode_report_body(entries)
        _validate_body(self.params, body)
        now = int(self.clock() if now is None else now)
        digest = hashlib.sha256(body).digest()
        with self._lock:
            prior = self._dedup.get(digest)
            if prior is not None and now - prior.published_at <= self.dedup_window:
                return prior.report_id
            seq = self._next_seq
            report_id = hashlib.sha256(struct.pack(">Q", seq) + digest).hexdigest()[:24]
            rec = StoredReport(report_id, seq, now, body, self.params)
            rid = report_id.encode()
            self._append(_REC_REPORT, struct.pack(">QQB", seq, now, len(rid)) + rid + body)
            self._next_seq = seq + 1
            self._dedup[digest] = rec
            # publish: a reader sees the whole record or nothing
            reports, seqs = self._snapshot
            seqs.append(seq)
            reports.append(rec)
        return report_id

    def fetch_reports(self, cursor: int = 0, page_size: int = 100) -> tuple[list[StoredReport], int]:
        """Reports with seq > cursor in publication order, at most ``page_size`` of them."""
        if not isinstance(cursor, int) or cursor < 0 or cursor >= self._next_seq:
            raise InvalidCursor(f"cursor {cursor!r} was never issued")
        if page_size < 1:
            raise ValueError("page_size must be positive")
        reports, seqs = self._snapshot
        n = min(len(reports), len(seqs))
        start = bisect.bisect_right(seqs, cursor, 0, n)
        page = reports[start:min(n, start + page_size)]
        return page, (page[-1].seq if page else cursor)

    def iter_reports(self, cursor: int = 0, page_size: int = 100):
        while True:
            page, cursor = self.fetch_reports(cursor, page_size)
            if not page:
                return
            yield from page

    def purge_expired(self, now: int | None = None) -> int:
        now = int(self.clock() if now is None else now)
        cutoff = max(0, int(now - self.retention_window))
        with self._lock:
            removed = self._drop_before(cutoff)
            if removed:
                self._append(_REC_PURGE, struct.pack(">Q", cutoff))
        return removed

    @property
    def total_entries(self) -> int:
        return sum(r.entry_count for r in self._snapshot[0])

    def __len__(self):
        return len(self._snapshot[0])
