"""Signed beacons: (L, T, U, V, sigma) with sigma an ECDSA signature under d = r*x.

The verification key is V itself (V = rP = (r*x)G), so anyone can check the
signature but only the beacon's creator, who knows r and x, can produce it.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass

from . import ecdsa
from .beacon import Beacon
from .ecc import GroupElement, GroupParams, InvalidPoint
from .wire import DecodeError, Location, encode_timestamp, signed_beacon_size

FORMAT_VERSION = 1

# flags byte: bit0/bit1 parity of U.y/V.y, bit2/bit3 the bit just above the
# coord_bytes-wide field of r_sig/s_sig (needed when q > 2^(8*coord_bytes),
# as on secp160r1), high nibble the format version.
_U_PARITY, _V_PARITY, _R_HIGH, _S_HIGH = 1, 2, 4, 8


@dataclass(frozen=True)
class SignedBeacon:
    location: Location
    timestamp: int
    beacon: Beacon
    sigma: tuple[int, int]

    @property
    def params(self) -> GroupParams:
        return self.beacon.params


def signing_message(location: Location, timestamp: int, beacon: Beacon) -> bytes:
    """Canonical L || T || U || V bytes; points in SEC1 compressed form so parity is bound."""
    return location.to_bytes() + encode_timestamp(timestamp) + beacon.U.to_bytes() + beacon.V.to_bytes()


def sign_beacon(beacon: Beacon, r: int, x: int, location: Location, timestamp: int,
                nonce: tuple[int, GroupElement] | None = None) -> SignedBeacon:
    """Sign the beacon with d = r*x mod q.

    ``nonce`` is a precomputed (k, kG) pair; without it the RFC 6979 nonce is
    derived from d and the message hash.
    """
    q = beacon.params.q
    d = r * x % q
    if d == 0:
        raise ValueError("ephemeral signing key is zero; draw a new blinding scalar")
    sigma = ecdsa.sign(beacon.params, d, signing_message(location, timestamp, beacon), nonce)
    return SignedBeacon(location, timestamp, beacon, sigma)


def verify_signed_beacon(sb: SignedBeacon) -> bool:
    """Check sigma under P' = V. Freshness of T and L is the receiver's business."""
    try:
        message = signing_message(sb.location, sb.timestamp, sb.beacon)
    except ValueError:
        return False
    return ecdsa.verify(sb.beacon.V, message, sb.sigma)


def encode_signed_beacon(sb: SignedBeacon) -> bytes:
    params = sb.params
    cb = params.coord_bytes
    limit = 1 << (8 * cb)
    r_sig, s_sig = sb.sigma
    if not (0 < r_sig < params.q and 0 < s_sig < params.q):
        raise ValueError("signature scalars out of range")
    flags = FORMAT_VERSION << 4
    flags |= _U_PARITY if sb.beacon.U.parity else 0
    flags |= _V_PARITY if sb.beacon.V.parity else 0
    flags |= _R_HIGH if r_sig >= limit else 0
    flags |= _S_HIGH if s_sig >= limit else 0
    return b"".join((
        bytes([flags]),
        sb.location.to_bytes(),
        encode_timestamp(sb.timestamp),
        sb.beacon.U.x_bytes(),
        sb.beacon.V.x_bytes(),
        (r_sig % limit).to_bytes(cb, "big"),
        (s_sig % limit).to_bytes(cb, "big"),
    ))


def decode_signed_beacon(params: GroupParams, data: bytes) -> SignedBeacon:
    cb = params.coord_bytes
    if len(data) != signed_beacon_size(params):
        raise DecodeError(f"signed beacon must be {signed_beacon_size(params)} bytes, got {len(data)}")
    flags = data[0]
    if flags >> 4 != FORMAT_VERSION:
        raise DecodeError(f"unsupported format version {flags >> 4}")
    location = Location.from_bytes(data[1:9])
    (timestamp,) = struct.unpack(">I", data[9:13])
    fields = [int.from_bytes(data[13 + i * cb: 13 + (i + 1) * cb], "big") for i in range(4)]
    ux, vx, r_sig, s_sig = fields
    r_sig |= (1 << (8 * cb)) if flags & _R_HIGH else 0
    s_sig |= (1 << (8 * cb)) if flags & _S_HIGH else 0
    if not (0 < r_sig < params.q and 0 < s_sig < params.q):
        raise DecodeError("signature scalar out of range")
    try:
        U = GroupElement.from_x(params, ux, flags & _U_PARITY)
        V = GroupElement.from_x(params, vx, (flags & _V_PARITY) >> 1)
    except InvalidPoint as exc:
        raise DecodeError(f"invalid beacon point: {exc}") from None
    return SignedBeacon(location, timestamp, Beacon(U, V), (r_sig, s_sig))
