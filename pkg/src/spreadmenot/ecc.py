"""Prime-order elliptic-curve groups.

Four SECG curves plus a deliberately tiny TOY curve (order 101) on which
discrete logs are brute-forceable. All five have cofactor 1, so every point
on the curve is in the order-q subgroup and an on-curve check is also a
subgroup check.

Point-scalar multiplication on the SECG curves goes through libcrypto when it
is available; everything else (and the fallback) is the Jacobian-coordinate
arithmetic below. Set ``SPREADMENOT_EC_BACKEND=python`` to force the fallback.
"""
from __future__ import annotations

import enum
import functools
import os
import secrets
import threading
from contextlib import contextmanager
from dataclasses import dataclass, field

from . import _openssl

TOY_MAX_ORDER = 1 << 20


class CurveId(str, enum.Enum):
    SECP128R1 = "secp128r1"
    SECP160R1 = "secp160r1"
    SECP192K1 = "secp192k1"
    SECP256K1 = "secp256k1"
    TOY = "toy"

    @classmethod
    def parse(cls, value: str | CurveId) -> CurveId:
        if isinstance(value, CurveId):
            return value
        try:
            return cls(value.lower())
        except ValueError:
            raise ValueError(f"unknown curve {value!r}; expected one of "
                             f"{', '.join(c.value for c in cls)}") from None


class InvalidPoint(ValueError):
    """Raised when bytes do not decode to a valid group element."""


@dataclass(frozen=True, eq=False)
class GroupParams:
    """Short-Weierstrass curve y^2 = x^3 + ax + b over F_p with a generator of prime order q."""

    curve_id: CurveId
    p: int
    a: int
    b: int
    q: int
    gx: int
    gy: int
    coord_bytes: int
    security_bits: int
    _backend: object = field(default=None, repr=False)

    @property
    def scalar_bytes(self) -> int:
        return (self.q.bit_length() + 7) // 8

    @functools.cached_property
    def G(self) -> GroupElement:
        return GroupElement(self, self.gx, self.gy)

    @functools.cached_property
    def identity(self) -> GroupElement:
        return GroupElement(self, None, None)

    def is_on_curve(self, x: int, y: int) -> bool:
        p = self.p
        return 0 <= x < p and 0 <= y < p and (y * y - (x * x * x + self.a * x + self.b)) % p == 0

    def __eq__(self, other):
        return isinstance(other, GroupParams) and self.curve_id == other.curve_id

    def __hash__(self):
        return hash(self.curve_id)

    def __reduce__(self):
        return get_params, (self.curve_id.value,)


class GroupElement:
    """An affine point, or the identity when ``x`` and ``y`` are None."""

    __slots__ = ("params", "x", "y")

    def __init__(self, params: GroupParams, x: int | None, y: int | None):
        self.params = params
        self.x = x
        self.y = y

    @property
    def is_identity(self) -> bool:
        return self.x is None

    @property
    def parity(self) -> int:
        if self.y is None:
            raise ValueError("identity has no parity")
        return self.y & 1

    def __eq__(self, other):
        if not isinstance(other, GroupElement):
            return NotImplemented
        return self.x == other.x and self.y == other.y and self.params == other.params

    def __hash__(self):
        return hash((self.params.curve_id, self.x, self.y))

    def __repr__(self):
        if self.is_identity:
            return f"GroupElement({self.params.curve_id.value}, identity)"
        return f"GroupElement({self.params.curve_id.value}, {self.to_bytes().hex()})"

    def __reduce__(self):
        return GroupElement, (self.params, self.x, self.y)

    def __neg__(self) -> GroupElement:
        if self.is_identity:
            return self
        return GroupElement(self.params, self.x, (-self.y) % self.params.p)

    def __add__(self, other: GroupElement) -> GroupElement:
        if not isinstance(other, GroupElement):
            return NotImplemented
        if other.params != self.params:
            raise ValueError("cannot add points from different groups")
        return _affine_add(self, other)

    def __sub__(self, other: GroupElement) -> GroupElement:
        return self + (-other)

    def __rmul__(self, k: int) -> GroupElement:
        return scalar_mul(k, self)

    def x_bytes(self) -> bytes:
        if self.is_identity:
            raise ValueError("identity has no x-coordinate")
        return self.x.to_bytes(self.params.coord_bytes, "big")

    def to_bytes(self) -> bytes:
        """SEC1 compressed encoding: 0x02/0x03 parity prefix, then the x-coordinate."""
        return bytes([2 | self.parity]) + self.x_bytes()

    @classmethod
    def from_x(cls, params: GroupParams, x: int, parity: int) -> GroupElement:
        return _decompress(params, x, parity & 1)

    @classmethod
    def from_bytes(cls, params: GroupParams, data: bytes) -> GroupElement:
        if len(data) != params.coord_bytes + 1 or data[0] not in (2, 3):
            raise InvalidPoint(f"expected {params.coord_bytes + 1}-byte compressed point")
        return _decompress(params, int.from_bytes(data[1:], "big"), data[0] & 1)


@functools.lru_cache(maxsize=1 << 14)
def _decompress(params: GroupParams, x: int, parity: int) -> GroupElement:
    p = params.p
    if not 0 <= x < p:
        raise InvalidPoint("x-coordinate out of field range")
    rhs = (x * x * x + params.a * x + params.b) % p
    # p = 3 mod 4 for every curve here
    y = pow(rhs, (p + 1) // 4, p)
    if y * y % p != rhs:
        raise InvalidPoint("x-coordinate is not on the curve")
    if y == 0 and parity:
        raise InvalidPoint("no point with odd y for this x")
    if y & 1 != parity:
        y = p - y
    return GroupElement(params, x, y)


def _affine_add(P: GroupElement, Q: GroupElement) -> GroupElement:
    if P.x is None:
        return Q
    if Q.x is None:
        return P
    params = P.params
    p = params.p
    if P.x == Q.x:
        if (P.y + Q.y) % p == 0:
            return params.identity
        lam = (3 * P.x * P.x + params.a) * pow(2 * P.y, -1, p) % p
    else:
        lam = (Q.y - P.y) * pow(Q.x - P.x, -1, p) % p
    x3 = (lam * lam - P.x - Q.x) % p
    return GroupElement(params, x3, (lam * (P.x - x3) - P.y) % p)


# -- Jacobian arithmetic for the pure-Python path ---------------------------

def _jdouble(P, a, p):
    X, Y, Z = P
    if not Y or not Z:
        return (1, 1, 0)
    YY = Y * Y % p
    S = 4 * X * YY % p
    if a == 0:
        M = 3 * X * X % p
    else:
        ZZ = Z * Z % p
        M = (3 * X * X + a * ZZ * ZZ) % p
    X3 = (M * M - 2 * S) % p
    return (X3, (M * (S - X3) - 8 * YY * YY) % p, 2 * Y * Z % p)


def _jadd(P, Q, a, p):
    if not P[2]:
        return Q
    if not Q[2]:
        return P
    X1, Y1, Z1 = P
    X2, Y2, Z2 = Q
    Z1Z1 = Z1 * Z1 % p
    Z2Z2 = Z2 * Z2 % p
    U1 = X1 * Z2Z2 % p
    U2 = X2 * Z1Z1 % p
    S1 = Y1 * Z2 * Z2Z2 % p
    S2 = Y2 * Z1 * Z1Z1 % p
    if U1 == U2:
        return _jdouble(P, a, p) if S1 == S2 else (1, 1, 0)
    H = U2 - U1
    R = S2 - S1
    HH = H * H % p
    HHH = H * HH % p
    V = U1 * HH % p
    X3 = (R * R - HHH - 2 * V) % p
    return (X3, (R * (V - X3) - S1 * HHH) % p, Z1 * Z2 * H % p)


def _wnaf(k: int, w: int = 4) -> list[int]:
    digits = []
    half, full = 1 << (w - 1), 1 << w
    while k:
        if k & 1:
            d = k % full
            if d >= half:
                d -= full
            k -= d
        else:
            d = 0
        digits.append(d)
        k >>= 1
    return digits


def python_mul(k: int, x: int, y: int, a: int, p: int) -> tuple[int, int] | None:
    """k*(x, y) by width-4 wNAF in Jacobian coordinates; None for infinity."""
    base = (x, y, 1)
    twice = _jdouble(base, a, p)
    table = {1: base}
    for d in range(3, 8, 2):
        table[d] = _jadd(table[d - 2], twice, a, p)
    R = (1, 1, 0)
    for d in reversed(_wnaf(k)):
        R = _jdouble(R, a, p)
        if d > 0:
            R = _jadd(R, table[d], a, p)
        elif d < 0:
            X, Y, Z = table[-d]
            R = _jadd(R, (X, p - Y, Z), a, p)
    X, Y, Z = R
    if not Z:
        return None
    zi = pow(Z, -1, p)
    zi2 = zi * zi % p
    return X * zi2 % p, Y * zi2 * zi % p


class _MulCounter:
    def __init__(self):
        self._lock = threading.Lock()
        self.total = 0

    def bump(self):
        with self._lock:
            self.total += 1


_counter = _MulCounter()


@contextmanager
def count_scalar_muls():
    """Count scalar_mul calls made (by any thread) inside the block.

    >>> with count_scalar_muls() as c:
    ...     _ = scalar_mul(3, TOY.G)
    >>> c.count
    1
    """
    class _Result:
        count = 0
    start = _counter.total
    res = _Result()
    try:
        yield res
    finally:
        res.count = _counter.total - start


def scalar_mul(k: int, E: GroupElement) -> GroupElement:
    """Return k*E. Scalars are reduced mod q; 0*E is the identity."""
    _counter.bump()
    params = E.params
    k %= params.q
    if k == 0 or E.is_identity:
        return params.identity
    backend = params._backend
    if backend is not None:
        if E.x == params.gx and E.y == params.gy:
            xy = backend.mul(k, None)
        else:
            xy = backend.mul(k, (E.x, E.y))
    else:
        xy = python_mul(k, E.x, E.y, params.a, params.p)
    if xy is None:
        return params.identity
    return GroupElement(params, *xy)


def random_scalar(params: GroupParams, rng=None) -> int:
    """Uniform scalar in [1, q)."""
    rng = rng or secrets.SystemRandom()
    return rng.randrange(1, params.q)


random_nonzero_scalar = random_scalar


def toy_discrete_log(E: GroupElement, base: GroupElement, params: GroupParams | None = None) -> int:
    """Exhaustive discrete log; refuses anything but the TOY group."""
    params = params or base.params
    if params.curve_id is not CurveId.TOY or params.q > TOY_MAX_ORDER:
        raise ValueError("toy_discrete_log only runs on the TOY group")
    acc = params.identity
    for k in range(params.q):
        if acc == E:
            return k
        acc = acc + base
    raise ValueError("no discrete log: element not in the subgroup generated by base")


def _build(curve_id, p, a, b, q, gx, gy, coord_bytes, security_bits) -> GroupParams:
    backend = None
    if curve_id is not CurveId.TOY and os.environ.get("SPREADMENOT_EC_BACKEND", "").lower() != "python":
        backend = _openssl.bind_curve(curve_id.value, p, a, b, q, gx, gy)
    return GroupParams(curve_id, p, a % p, b, q, gx, gy, coord_bytes, security_bits, backend)


# SEC 2 v1/v2 domain parameters.
SECP128R1 = _build(
    CurveId.SECP128R1,
    p=0xFFFFFFFDFFFFFFFFFFFFFFFFFFFFFFFF,
    a=-3,
    b=0xE87579C11079F43DD824993C2CEE5ED3,
    q=0xFFFFFFFE0000000075A30D1B9038A115,
    gx=0x161FF7528B899B2D0C28607CA52C5B86,
    gy=0xCF5AC8395BAFEB13C02DA292DDED7A83,
    coord_bytes=16, security_bits=64,
)
SECP160R1 = _build(
    CurveId.SECP160R1,
    p=0xFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFF7FFFFFFF,
    a=-3,
    b=0x1C97BEFC54BD7A8B65ACF89F81D4D4ADC565FA45,
    q=0x0100000000000000000001F4C8F927AED3CA752257,
    gx=0x4A96B5688EF573284664698968C38BB913CBFC82,
    gy=0x23A628553168947D59DCC912042351377AC5FB32,
    coord_bytes=20, security_bits=80,
)
SECP192K1 = _build(
    CurveId.SECP192K1,
    p=0xFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFEFFFFEE37,
    a=0,
    b=3,
    q=0xFFFFFFFFFFFFFFFFFFFFFFFE26F2FC170F69466A74DEFD8D,
    gx=0xDB4FF10EC057E9AE26B07D0280B7F4341DA5D1B1EAE06C7D,
    gy=0x9B2F2F6D9C5628A7844163D015BE86344082AA88D95E2F9D,
    coord_bytes=24, security_bits=96,
)
SECP256K1 = _build(
    CurveId.SECP256K1,
    p=0xFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFEFFFFFC2F,
    a=0,
    b=7,
    q=0xFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFEBAAEDCE6AF48A03BBFD25E8CD0364141,
    gx=0x79BE667EF9DCBBAC55A06295CE870B07029BFCDB2DCE28D959F2815B16F81798,
    gy=0x483ADA7726A3C4655DA4FBFC0E1108A8FD17B448A68554199C47D08FFB10D4B8,
    coord_bytes=32, security_bits=128,
)
# y^2 = x^3 + 3x + 19 over F_103 has exactly 101 points, so every
# non-identity point generates the whole group.
TOY = _build(CurveId.TOY, p=103, a=3, b=19, q=101, gx=0, gy=15, coord_bytes=1, security_bits=0)

_ALL = {c.curve_id: c for c in (SECP128R1, SECP160R1, SECP192K1, SECP256K1, TOY)}
STANDARD_CURVES = (SECP128R1, SECP160R1, SECP192K1, SECP256K1)


def get_params(curve: str | CurveId) -> GroupParams:
    return _ALL[CurveId.parse(curve)]


def params_for_security(bits: int) -> GroupParams:
    for params in STANDARD_CURVES:
        if params.security_bits == bits:
            return params
    raise ValueError(f"no curve at {bits}-bit security; expected 64, 80, 96 or 128")
