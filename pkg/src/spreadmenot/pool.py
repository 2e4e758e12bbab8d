"""Offline precomputation of beacon and signature-nonce material.

Each triple carries everything the online path needs to emit one signed
beacon without a single point-scalar multiplication: (r, rG, rP) for the
beacon and (k, kG) for the ECDSA nonce.
"""
from __future__ import annotations

import threading
from collections import deque
from dataclasses import dataclass

from .beacon import Beacon, KeyPair
from .ecc import GroupElement, random_scalar, scalar_mul
from .signed import SignedBeacon, sign_beacon
from .wire import Location


class PoolExhausted(LookupError):
    pass


@dataclass(frozen=True)
class PrecomputedTriple:
    r: int
    rG: GroupElement
    rP: GroupElement
    k_nonce: int
    kG: GroupElement

    @property
    def beacon(self) -> Beacon:
        return Beacon(self.rG, self.rP)


class BeaconPool:
    """Single-use store of precomputed triples; draws are atomic."""

    def __init__(self, keypair: KeyPair):
        self.keypair = keypair
        self._items: deque[PrecomputedTriple] = deque()
        self._lock = threading.Lock()

    def __len__(self):
        return len(self._items)

    def fill(self, count: int, rng=None) -> None:
        if count < 1:
            raise ValueError("count must be at least 1")
        params, P = self.keypair.params, self.keypair.P
        fresh = []
        for _ in range(count):
            r = random_scalar(params, rng)
            k = random_scalar(params, rng)
            fresh.append(PrecomputedTriple(r, scalar_mul(r, params.G), scalar_mul(r, P),
                                           k, scalar_mul(k, params.G)))
        with self._lock:
            self._items.extend(fresh)

    def draw(self) -> PrecomputedTriple:
        with self._lock:
            if not self._items:
                raise PoolExhausted("precompute pool is empty")
            return self._items.popleft()


def precompute_pool_fill(keypair: KeyPair, count: int, rng=None) -> BeaconPool:
    pool = BeaconPool(keypair)
    pool.fill(count, rng)
    return pool


def signed_beacon_from_pool(pool: BeaconPool, location: Location, timestamp: int
                            ) -> tuple[SignedBeacon, int]:
    """Online path: one hash, a few modular operations, no point multiplications.

    Returns the signed beacon and its blinding scalar r.
    """
    triple = pool.draw()
    sb = sign_beacon(triple.beacon, triple.r, pool.keypair.x, location, timestamp,
                     nonce=(triple.k_nonce, triple.kG))
    return sb, triple.r
