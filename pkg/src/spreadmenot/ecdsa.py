"""ECDSA over the groups in :mod:`spreadmenot.ecc` with SHA-256.

Nonces come either from RFC 6979 (deterministic in the key and message hash)
or from a precomputed ``(k, kG)`` pair, in which case signing performs no
point-scalar multiplication at all.
"""
from __future__ import annotations

import hashlib
import hmac

from .ecc import GroupElement, GroupParams, scalar_mul

HASH = hashlib.sha256


def bits2int(data: bytes, q: int) -> int:
    value = int.from_bytes(data, "big")
    excess = len(data) * 8 - q.bit_length()
    return value >> excess if excess > 0 else value


def hash_message(message: bytes, q: int) -> int:
    return bits2int(HASH(message).digest(), q)


def rfc6979_nonces(q: int, d: int, digest: bytes):
    """Yield the RFC 6979 (section 3.2) nonce sequence for key d and message digest."""
    rlen = (q.bit_length() + 7) // 8
    x_octets = d.to_bytes(rlen, "big")
    h_octets = (bits2int(digest, q) % q).to_bytes(rlen, "big")
    V = b"\x01" * 32
    K = b"\x00" * 32
    K = hmac.new(K, V + b"\x00" + x_octets + h_octets, HASH).digest()
    V = hmac.new(K, V, HASH).digest()
    K = hmac.new(K, V + b"\x01" + x_octets + h_octets, HASH).digest()
    V = hmac.new(K, V, HASH).digest()
    while True:
        t = b""
        while len(t) * 8 < q.bit_length():
            V = hmac.new(K, V, HASH).digest()
            t += V
        k = bits2int(t, q)
        if 1 <= k < q:
            yield k
        K = hmac.new(K, V + b"\x00", HASH).digest()
        V = hmac.new(K, V, HASH).digest()


def sign(params: GroupParams, d: int, message: bytes,
         nonce: tuple[int, GroupElement] | None = None) -> tuple[int, int]:
    """Sign ``message`` under private key d; returns (r, s).

    With ``nonce=(k, kG)`` the given pair is used as-is and must never be reused.
    """
    q = params.q
    if not 1 <= d < q:
        raise ValueError("signing key must lie in [1, q)")
    digest = HASH(message).digest()
    e = bits2int(digest, q)
    if nonce is not None:
        candidates = iter([nonce])
    else:
        candidates = ((k, scalar_mul(k, params.G)) for k in rfc6979_nonces(q, d, digest))
    for k, kG in candidates:
        r = kG.x % q
        if r == 0:
            continue
        s = pow(k, -1, q) * (e + r * d) % q
        if s == 0:
            continue
        return r, s
    raise ValueError("precomputed nonce produced a degenerate signature")


def verify(Q: GroupElement, message: bytes, signature: tuple[int, int]) -> bool:
    params = Q.params
    q = params.q
    r, s = signature
    if not (1 <= r < q and 1 <= s < q) or Q.is_identity:
        return False
    e = hash_message(message, q)
    w = pow(s, -1, q)
    R = scalar_mul(e * w % q, params.G) + scalar_mul(r * w % q, Q)
    if R.is_identity:
        return False
    return R.x % q == r
