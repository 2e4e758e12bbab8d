"""Unlinkable proximity beacons over elliptic-curve groups, with signed
over-the-air frames, a report authority and a discrete-event simulator."""
from .beacon import Beacon, KeyPair, gen_beacon, gen_key, rand_beacon, test_beacon
from .device import ContactRecord, DeviceAgent, DeviceConfig, Disposition
from .ecc import (SECP128R1, SECP160R1, SECP192K1, SECP256K1, STANDARD_CURVES, TOY, CurveId,
                  GroupElement, GroupParams, get_params)
from .pool import BeaconPool, precompute_pool_fill, signed_beacon_from_pool
from .report import PublishedReport
from .signed import SignedBeacon, decode_signed_beacon, encode_signed_beacon, sign_beacon, verify_signed_beacon

__version__ = "0.1.0"

__all__ = [
    "Beacon", "BeaconPool", "ContactRecord", "CurveId", "DeviceAgent", "DeviceConfig", "Disposition",
    "GroupElement", "GroupParams", "KeyPair", "PublishedReport", "SECP128R1", "SECP160R1", "SECP192K1",
    "SECP256K1", "STANDARD_CURVES", "SignedBeacon", "TOY", "decode_signed_beacon",
    "encode_signed_beacon", "gen_beacon", "gen_key", "get_params", "precompute_pool_fill",
    "rand_beacon", "sign_beacon", "signed_beacon_from_pool", "test_beacon", "verify_signed_beacon",
]
