"""Byte-level encodings shared by the device, the authority service and the CLI.

All integers are big-endian. Points travel in SEC1 compressed form
(parity prefix byte + x-coordinate) except inside the signed-beacon frame,
where the two parity bits are packed into the leading flags byte.
"""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass

from .beacon import Beacon
from .ecc import GroupParams, InvalidPoint, params_for_security

BLE_MAX_FRAME = 265
BLE_MAX_PAYLOAD = 251
LOCATION_SCALE = 10_000  # 1e-4 degree resolution
EARTH_RADIUS_M = 6_371_008.8


class DecodeError(ValueError):
    pass


class MalformedEntry(DecodeError):
    def __init__(self, index: int, reason: str):
        super().__init__(f"entry {index}: {reason}")
        self.index = index


@dataclass(frozen=True)
class Location:
    """Latitude/longitude quantized to 1e-4 degrees."""

    lat_e4: int
    lon_e4: int

    def __post_init__(self):
        if not -90 * LOCATION_SCALE <= self.lat_e4 <= 90 * LOCATION_SCALE:
            raise ValueError(f"latitude out of range: {self.lat_e4}")
        if not -180 * LOCATION_SCALE <= self.lon_e4 <= 180 * LOCATION_SCALE:
            raise ValueError(f"longitude out of range: {self.lon_e4}")

    @classmethod
    def from_degrees(cls, lat: float, lon: float) -> Location:
        return cls(round(lat * LOCATION_SCALE), round(lon * LOCATION_SCALE))

    @property
    def lat(self) -> float:
        return self.lat_e4 / LOCATION_SCALE

    @property
    def lon(self) -> float:
        return self.lon_e4 / LOCATION_SCALE

    def to_bytes(self) -> bytes:
        return struct.pack(">ii", self.lat_e4, self.lon_e4)

    @classmethod
    def from_bytes(cls, data: bytes) -> Location:
        try:
            return cls(*struct.unpack(">ii", data))
        except (struct.error, ValueError) as exc:
            raise DecodeError(f"bad location: {exc}") from None


def haversine_m(a: Location, b: Location) -> float:
    """Great-circle distance in meters."""
    phi1, phi2 = math.radians(a.lat), math.radians(b.lat)
    dphi = phi2 - phi1
    dlmb = math.radians(b.lon - a.lon)
    h = math.sin(dphi / 2) ** 2 + math.cos(phi1) * math.cos(phi2) * math.sin(dlmb / 2) ** 2
    return 2 * EARTH_RADIUS_M * math.asin(min(1.0, math.sqrt(h)))


def encode_timestamp(t: int) -> bytes:
    if not 0 <= t < 1 << 32:
        raise ValueError(f"timestamp {t} does not fit in 32 bits")
    return struct.pack(">I", t)


# -- report bodies -----------------------------------------------------------

def encode_report_body(entries) -> bytes:
    """[u32 entry-count] followed by each beacon as two compressed points."""
    entries = list(entries)
    return struct.pack(">I", len(entries)) + b"".join(e.to_bytes() for e in entries)


def split_report_body(params: GroupParams, body: bytes) -> list[bytes]:
    """Check framing and return the raw per-entry byte strings."""
    if len(body) < 4:
        raise DecodeError("report body shorter than its count header")
    (count,) = struct.unpack_from(">I", body)
    size = Beacon.encoded_size(params)
    if len(body) != 4 + count * size:
        raise DecodeError(f"report body length {len(body)} does not match "
                          f"{count} entries of {size} bytes")
    return [body[4 + i * size: 4 + (i + 1) * size] for i in range(count)]


def decode_report_body(params: GroupParams, body: bytes) -> list[Beacon]:
    out = []
    for i, raw in enumerate(split_report_body(params, body)):
        try:
            out.append(Beacon.from_bytes(params, raw))
        except (InvalidPoint, ValueError) as exc:
            raise MalformedEntry(i, str(exc)) from None
    return out


# -- payload accounting ------------------------------------------------------

def signed_beacon_size(params: GroupParams) -> int:
    """flags(1) + location(8) + timestamp(4) + U.x + V.x + r_sig + s_sig."""
    return 13 + 4 * params.coord_bytes


def paper_payload_accounting(security_bits: int) -> int:
    """Payload counted as two bare x-coordinates, two signature scalars and a 4-byte timestamp."""
    return 4 * params_for_security(security_bits).coord_bytes + 4


def fits_ble_payload(size: int) -> bool:
    return size <= BLE_MAX_PAYLOAD
