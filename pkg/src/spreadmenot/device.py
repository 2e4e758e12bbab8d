"""Per-device protocol state: rotation, reception filtering, contact list, reporting, exposure checks."""
from __future__ import annotations

import enum
import logging
import secrets
import struct
from dataclasses import dataclass, field
from pathlib import Path

from .beacon import Beacon, KeyPair, gen_beacon, rand_beacon, test_beacon
from .ecc import GroupParams, InvalidPoint, get_params
from .pool import BeaconPool, PoolExhausted, signed_beacon_from_pool
from .report import PublishedReport
from .signed import SignedBeacon, decode_signed_beacon, sign_beacon, verify_signed_beacon
from .wire import DecodeError, Location, haversine_m

logger = logging.getLogger(__name__)

MINUTE = 60
RESAMPLE_LIMIT = 64
DAY = 86_400


@dataclass(frozen=True)
class DeviceConfig:
    """Durations are in seconds, distances in meters."""

    rotation_interval: float = 15 * MINUTE
    proximity_threshold: float = 2.0
    significance_min_duration: float = 10 * MINUTE
    significance_min_receptions: int = 5
    retention_window: float = 14 * DAY
    time_sync_tolerance: float = 10.0
    location_tolerance: float = 500.0
    # re-randomize stored contacts as an offline maintenance step
    rerandomize_contacts: bool = True

    def __post_init__(self):
        for name in ("rotation_interval", "proximity_threshold", "significance_min_duration",
                     "significance_min_receptions", "retention_window",
                     "time_sync_tolerance", "location_tolerance"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.significance_min_duration > self.retention_window:
            raise ValueError("significance_min_duration exceeds retention_window")

    @property
    def staging_lifetime(self) -> float:
        # one rotation window plus a grace of two more
        return 3 * self.rotation_interval


class Disposition(str, enum.Enum):
    ACCEPTED_STAGED = "accepted-staged"
    PROMOTED = "promoted-to-contact"
    CONTACT_REFRESHED = "contact-refreshed"
    REJECTED_STALE_TIMESTAMP = "rejected:stale-timestamp"
    REJECTED_REMOTE_LOCATION = "rejected:remote-location"
    REJECTED_TOO_FAR = "rejected:too-far"
    REJECTED_BAD_SIGNATURE = "rejected:bad-signature"
    REJECTED_MALFORMED = "rejected:malformed"

    @property
    def rejected(self) -> bool:
        return self.value.startswith("rejected:")

    @property
    def reason(self) -> str | None:
        return self.value.split(":", 1)[1] if self.rejected else None


@dataclass
class ContactRecord:
    beacon: Beacon
    first_seen: int
    last_seen: int
    reception_count: int
    verified: bool = True


@dataclass
class PendingSighting:
    key: bytes
    sightings: list[tuple[int, float, SignedBeacon]] = field(default_factory=list)

    @property
    def first_seen(self) -> int:
        return self.sightings[0][0]

    @property
    def last_seen(self) -> int:
        return self.sightings[-1][0]


class DeviceAgent:
    """One user's device.

    The ``check_*`` switches exist for ablation experiments; a deployed
    device keeps all three on.
    """

    def __init__(self, keypair: KeyPair, config: DeviceConfig | None = None, *, rng=None,
                 pool: BeaconPool | None = None, check_freshness: bool = True,
                 check_location: bool = True, check_signature: bool = True):
        self.keypair = keypair
        self.config = config or DeviceConfig()
        self.rng = rng or secrets.SystemRandom()
        self.pool = pool
        self.check_freshness = check_freshness
        self.check_location = check_location
        self.check_signature = check_signature

        self.current: Beacon | None = None
        self._r: int | None = None
        self.last_rotation: int | None = None
        self.pending: dict[bytes, PendingSighting] = {}
        # keyed by the beacon bytes as received; the stored beacon may since
        # have been re-randomized
        self.contacts: dict[bytes, ContactRecord] = {}
        self._refreshed: set[bytes] = set()
        self._last_eviction = None
        self.signature_verifications = 0
        self.promotions = 0

    @property
    def params(self) -> GroupParams:
        return self.keypair.params

    # -- transmit side ---------------------------------------------------------

    def rotate_beacon(self, now: int, location: Location) -> SignedBeacon:
        if self.last_rotation is not None and now < self.last_rotation + self.config.rotation_interval:
            raise ValueError("rotation requested before the current window ended")
        sb = None
        if self.pool is not None:
            try:
                sb, r = signed_beacon_from_pool(self.pool, location, now)
            except PoolExhausted:
                logger.debug("precompute pool empty, generating beacon online")
        if sb is None:
            beacon, r = gen_beacon(self.keypair.P, self.rng)
            sb = sign_beacon(beacon, r, self.keypair.x, location, now)
        self.current, self._r = sb.beacon, r
        self.last_rotation = now
        return sb

    def broadcast(self, now: int, location: Location) -> SignedBeacon:
        """The advertisement for this instant: the window's beacon, freshly signed with T=now, L=location."""
        if self.last_rotation is None or now >= self.last_rotation + self.config.rotation_interval:
            return self.rotate_beacon(now, location)
        return sign_beacon(self.current, self._r, self.keypair.x, location, now)

    # -- receive side ----------------------------------------------------------

    def on_receive(self, sb: SignedBeacon | bytes, now: int, own_location: Location,
                   measured_distance: float) -> Disposition:
        cfg = self.config
        if isinstance(sb, (bytes, bytearray)):
            try:
                sb = decode_signed_beacon(self.params, bytes(sb))
            except (DecodeError, InvalidPoint, ValueError):
                return Disposition.REJECTED_MALFORMED
        self._maybe_evict(now)
        if self.check_freshness and abs(now - sb.timestamp) > cfg.time_sync_tolerance:
            return Disposition.REJECTED_STALE_TIMESTAMP
        if self.check_location and haversine_m(own_location, sb.location) > cfg.location_tolerance:
            return Disposition.REJECTED_REMOTE_LOCATION
        if measured_distance > cfg.proximity_threshold:
            return Disposition.REJECTED_TOO_FAR

        key = sb.beacon.to_bytes()
        record = self.contacts.get(key)
        if record is not None:
            record.last_seen = max(record.last_seen, now)
            record.reception_count += 1
            return Disposition.CONTACT_REFRESHED

        pending = self.pending.get(key)
        if pending is None:
            pending = self.pending[key] = PendingSighting(key)
        pending.sightings.append((now, measured_distance, sb))
        if (len(pending.sightings) < cfg.significance_min_receptions
                or pending.last_seen - pending.first_seen < cfg.significance_min_duration):
            return Disposition.ACCEPTED_STAGED

        del self.pending[key]
        if self.check_signature:
            # deferred: one verification per promotion, never per reception
            self.signature_verifications += 1
            if not verify_signed_beacon(pending.sightings[-1][2]):
                return Disposition.REJECTED_BAD_SIGNATURE
        self.contacts[key] = ContactRecord(sb.beacon, pending.first_seen, pending.last_seen,
                                           len(pending.sightings), verified=self.check_signature)
        self.promotions += 1
        return Disposition.PROMOTED

    def _maybe_evict(self, now: int) -> None:
        if self._last_eviction is None or now - self._last_eviction >= MINUTE:
            self._last_eviction = now
            self.evict_stale(now)

    def evict_stale(self, now: int) -> int:
        cutoff = now - self.config.staging_lifetime
        stale = [k for k, p in self.pending.items() if p.first_seen < cutoff]
        for k in stale:
            del self.pending[k]
        return len(stale)

    # -- contact list maintenance --------------------------------------------

    def expire_contacts(self, now: int) -> int:
        cutoff = now - self.config.retention_window
        old = [k for k, rec in self.contacts.items() if rec.last_seen < cutoff]
        for k in old:
            del self.contacts[k]
            self._refreshed.discard(k)
        return len(old)

    def refresh_stored_beacons(self, rng=None) -> int:
        """Offline job: re-randomize every stored beacon not yet re-randomized."""
        rng = rng or self.rng
        done = 0
        for key, rec in self.contacts.items():
            if key not in self._refreshed:
                rec.beacon = rand_beacon(rec.beacon, rng)
                self._refreshed.add(key)
                done += 1
        return done

    def maintain(self, now: int) -> None:
        self.expire_contacts(now)
        self.evict_stale(now)
        if self.config.rerandomize_contacts:
            self.refresh_stored_beacons()

    def prepare_report(self, rng=None) -> PublishedReport:
        return prepare_report(self.contacts.values(), rng or self.rng)

    def check_exposure(self, reports) -> list[tuple[str | None, int]]:
        return check_exposure(self.keypair, reports)

    def save_contacts(self, path) -> None:
        save_contacts(path, self.params, self.contacts.values())

    def load_contacts(self, path) -> int:
        params, records = load_contacts(path)
        if params != self.params:
            raise ValueError(f"contact file is for {params.curve_id.value}")
        for rec in records:
            self.contacts[rec.beacon.to_bytes()] = rec
        return len(records)


def prepare_report(records, rng=None) -> PublishedReport:
    """Re-randomize and permute stored beacons, dropping every other field."""
    rng = rng or secrets.SystemRandom()
    sources = [rec.beacon for rec in records]
    stored = {b.to_bytes() for b in sources}
    entries = []
    for beacon in sources:
        out = rand_beacon(beacon, rng)
        # a collision is only plausible on the toy group, where it can also be unavoidable
        for _ in range(RESAMPLE_LIMIT):
            if out.to_bytes() not in stored:
                break
            out = rand_beacon(beacon, rng)
        entries.append(out)
    rng.shuffle(entries)
    return PublishedReport(entries)


def check_exposure(keypair: KeyPair, reports) -> list[tuple[str | None, int]]:
    """Every (report_id, entry index) whose entry tests true under our key. One scalar_mul per entry."""
    x = keypair.x
    matches = []
    for report in reports:
        for i, entry in enumerate(report.entries):
            if test_beacon(entry, x):
                matches.append((report.report_id, i))
    return matches


# -- contact-list file ---------------------------------------------------------
# header: b"SMNC" u8 version, u8 curve-name length, curve name
# records: u32 length, then U | V (compressed) | u32 first_seen | u32 last_seen
#          | u32 reception_count | u8 verified

CONTACTS_MAGIC = b"SMNC"
CONTACTS_VERSION = 1


def save_contacts(path, params: GroupParams, records) -> None:
    name = params.curve_id.value.encode()
    chunks = [CONTACTS_MAGIC, bytes([CONTACTS_VERSION, len(name)]), name]
    for rec in records:
        payload = rec.beacon.to_bytes() + struct.pack(
            ">IIIB", rec.first_seen, rec.last_seen, rec.reception_count, int(rec.verified))
        chunks.append(struct.pack(">I", len(payload)) + payload)
    Path(path).write_bytes(b"".join(chunks))


def load_contacts(path) -> tuple[GroupParams, list[ContactRecord]]:
    data = Path(path).read_bytes()
    if data[:4] != CONTACTS_MAGIC or len(data) < 6:
        raise DecodeError("not a contact-list file")
    if data[4] != CONTACTS_VERSION:
        raise DecodeError(f"unsupported contact-list version {data[4]}")
    n = data[5]
    params = get_params(data[6:6 + n].decode())
    pos = 6 + n
    bsize = Beacon.encoded_size(params)
    records = []
    while pos < len(data):
        if pos + 4 > len(data):
            raise DecodeError("truncated record header")
        (length,) = struct.unpack_from(">I", data, pos)
        payload = data[pos + 4: pos + 4 + length]
        if length != bsize + 13 or len(payload) != length:
            raise DecodeError(f"bad record at offset {pos}")
        try:
            beacon = Beacon.from_bytes(params, payload[:bsize])
        except (InvalidPoint, ValueError) as exc:
            raise DecodeError(f"bad beacon at offset {pos}: {exc}") from None
        first, last, count, verified = struct.unpack_from(">IIIB", payload, bsize)
        records.append(ContactRecord(beacon, first, last, count, bool(verified)))
        pos += 4 + length
    return params, records
