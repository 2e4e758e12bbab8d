"""Re-randomizable beacons: key generation, beacon generation, re-randomization and ownership test."""
from __future__ import annotations

import secrets
from dataclasses import dataclass

from .ecc import GroupElement, GroupParams, InvalidPoint, random_scalar, scalar_mul


@dataclass(frozen=True)
class KeyPair:
    params: GroupParams
    x: int
    P: GroupElement

    def __post_init__(self):
        if not 1 <= self.x < self.params.q:
            raise ValueError("private key must lie in [1, q)")

    @classmethod
    def from_private(cls, params: GroupParams, x: int) -> KeyPair:
        return cls(params, x, scalar_mul(x, params.G))


@dataclass(frozen=True)
class Beacon:
    """The broadcast pair (U, V) = (rG, rP)."""

    U: GroupElement
    V: GroupElement

    def __post_init__(self):
        if self.U.is_identity or self.V.is_identity:
            raise ValueError("beacon components must not be the identity")
        if self.U.params != self.V.params:
            raise ValueError("beacon components belong to different groups")

    @property
    def params(self) -> GroupParams:
        return self.U.params

    def to_bytes(self) -> bytes:
        return self.U.to_bytes() + self.V.to_bytes()

    @classmethod
    def from_bytes(cls, params: GroupParams, data: bytes) -> Beacon:
        n = params.coord_bytes + 1
        if len(data) != 2 * n:
            raise InvalidPoint(f"beacon must be {2 * n} bytes, got {len(data)}")
        return cls(GroupElement.from_bytes(params, data[:n]), GroupElement.from_bytes(params, data[n:]))

    @staticmethod
    def encoded_size(params: GroupParams) -> int:
        return 2 * (params.coord_bytes + 1)


def gen_key(params: GroupParams, rng=None, *, x: int | None = None) -> KeyPair:
    """Draw a private key uniformly from [1, q) and return it with P = xG.

    ``x`` overrides the draw (tests only).
    """
    if x is None:
        x = random_scalar(params, rng)
    return KeyPair.from_private(params, x)


def gen_beacon(P: GroupElement, rng=None, *, r: int | None = None) -> tuple[Beacon, int]:
    """Return a fresh beacon (rG, rP) under public key P, plus the blinding scalar r.

    The caller keeps r only as long as it needs to sign with the beacon.
    """
    if P.is_identity:
        raise ValueError("public key must not be the identity")
    params = P.params
    if r is None:
        r = random_scalar(params, rng)
    elif not 1 <= r < params.q:
        raise ValueError("blinding scalar must lie in [1, q)")
    return Beacon(scalar_mul(r, params.G), scalar_mul(r, P)), r


def rand_beacon(C: Beacon, rng=None, *, r_prime: int | None = None) -> Beacon:
    """Return (r'U, r'V) for a uniform r' in [2, q).

    r' = 1 is excluded so the output never repeats the input bytes.
    """
    params = C.params
    if r_prime is None:
        rng = rng or secrets.SystemRandom()
        r_prime = rng.randrange(2, params.q)
    elif not 2 <= r_prime < params.q:
        raise ValueError("re-randomization scalar must lie in [2, q)")
    return Beacon(scalar_mul(r_prime, C.U), scalar_mul(r_prime, C.V))


def test_beacon(C: Beacon, x: int) -> bool:
    """True iff x*U == V, i.e. the beacon was generated under the public key xG."""
    if not 1 <= x < C.params.q:
        raise ValueError("private key must lie in [1, q)")
    return scalar_mul(x, C.U) == C.V


test_beacon.__test__ = False  # keep pytest from collecting it
