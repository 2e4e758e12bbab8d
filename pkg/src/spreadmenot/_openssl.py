"""Point-scalar multiplication through the system libcrypto (ctypes).

Only the four SECG curves are bound. Each curve group is checked against the
Python-side parameters at load time; any mismatch or missing symbol makes the
backend unavailable and callers fall back to the pure-Python arithmetic.
"""
from __future__ import annotations

import ctypes
import ctypes.util
import logging
import threading
from types import SimpleNamespace

logger = logging.getLogger(__name__)

_vp = ctypes.c_void_p
_SIGNATURES = [
    ("OBJ_sn2nid", ctypes.c_int, [ctypes.c_char_p]),
    ("EC_GROUP_new_by_curve_name", _vp, [ctypes.c_int]),
    ("EC_GROUP_get_curve", ctypes.c_int, [_vp, _vp, _vp, _vp, _vp]),
    ("EC_GROUP_get_order", ctypes.c_int, [_vp, _vp, _vp]),
    ("EC_GROUP_precompute_mult", ctypes.c_int, [_vp, _vp]),
    ("EC_GROUP_get0_generator", _vp, [_vp]),
    ("EC_POINT_new", _vp, [_vp]),
    ("EC_POINT_free", None, [_vp]),
    ("EC_POINT_mul", ctypes.c_int, [_vp, _vp, _vp, _vp, _vp, _vp]),
    ("EC_POINT_set_affine_coordinates", ctypes.c_int, [_vp, _vp, _vp, _vp, _vp]),
    ("EC_POINT_get_affine_coordinates", ctypes.c_int, [_vp, _vp, _vp, _vp, _vp]),
    ("EC_POINT_is_at_infinity", ctypes.c_int, [_vp, _vp]),
    ("EC_POINT_cmp", ctypes.c_int, [_vp, _vp, _vp, _vp]),
    ("BN_CTX_new", _vp, []),
    ("BN_new", _vp, []),
    ("BN_bin2bn", _vp, [ctypes.c_char_p, ctypes.c_int, _vp]),
    ("BN_bn2binpad", ctypes.c_int, [_vp, ctypes.c_char_p, ctypes.c_int]),
    ("BN_num_bits", ctypes.c_int, [_vp]),
]


class OpenSSLCurve:
    """One bound EC_GROUP with per-thread scratch space."""

    def __init__(self, lib, name: str, p: int, a: int, b: int, q: int, gx: int, gy: int):
        self._lib = lib
        self._nbytes = (max(p.bit_length(), q.bit_length()) + 7) // 8
        nid = lib.OBJ_sn2nid(name.encode())
        if nid <= 0:
            raise OSError(f"libcrypto does not know {name}")
        self._group = lib.EC_GROUP_new_by_curve_name(nid)
        if not self._group:
            raise OSError(f"cannot build EC_GROUP for {name}")
        self._local = threading.local()
        s = self._scratch()
        lib.EC_GROUP_get_curve(self._group, s.bx, s.by, s.bk, s.ctx)
        got = (self._int(s.bx), self._int(s.by), self._int(s.bk))
        lib.EC_GROUP_get_order(self._group, s.bx, s.ctx)
        got += (self._int(s.bx),)
        if got != (p, a % p, b % p, q):
            raise OSError(f"libcrypto parameters for {name} disagree")
        gen = lib.EC_GROUP_get0_generator(self._group)
        lib.EC_POINT_get_affine_coordinates(self._group, gen, s.bx, s.by, s.ctx)
        if (self._int(s.bx), self._int(s.by)) != (gx, gy):
            raise OSError(f"libcrypto generator for {name} disagrees")
        lib.EC_GROUP_precompute_mult(self._group, s.ctx)

    def _scratch(self):
        s = getattr(self._local, "s", None)
        if s is None:
            lib = self._lib
            s = SimpleNamespace()
            s.ctx = lib.BN_CTX_new()
            s.bx, s.by, s.bk = lib.BN_new(), lib.BN_new(), lib.BN_new()
            s.pin = lib.EC_POINT_new(self._group)
            s.pout = lib.EC_POINT_new(self._group)
            s.buf = ctypes.create_string_buffer(self._nbytes)
            self._local.s = s
        return s

    def _int(self, bn) -> int:
        buf = ctypes.create_string_buffer(self._nbytes)
        self._lib.BN_bn2binpad(bn, buf, self._nbytes)
        return int.from_bytes(buf.raw, "big")

    def _set(self, bn, value: int) -> None:
        raw = value.to_bytes(self._nbytes, "big")
        self._lib.BN_bin2bn(raw, self._nbytes, bn)

    def mul(self, k: int, point: tuple[int, int] | None):
        """Return k*point (or k*G when point is None) as affine (x, y), None for infinity."""
        lib, s = self._lib, self._scratch()
        self._set(s.bk, k)
        if point is None:
            ok = lib.EC_POINT_mul(self._group, s.pout, s.bk, None, None, s.ctx)
        else:
            self._set(s.bx, point[0])
            self._set(s.by, point[1])
            if not lib.EC_POINT_set_affine_coordinates(self._group, s.pin, s.bx, s.by, s.ctx):
                raise ValueError("point is not on the curve")
            ok = lib.EC_POINT_mul(self._group, s.pout, None, s.pin, s.bk, s.ctx)
        if not ok:
            raise ArithmeticError("EC_POINT_mul failed")
        if lib.EC_POINT_is_at_infinity(self._group, s.pout):
            return None
        lib.EC_POINT_get_affine_coordinates(self._group, s.pout, s.bx, s.by, s.ctx)
        lib.BN_bn2binpad(s.bx, s.buf, self._nbytes)
        x = int.from_bytes(s.buf.raw, "big")
        lib.BN_bn2binpad(s.by, s.buf, self._nbytes)
        return x, int.from_bytes(s.buf.raw, "big")


_lock = threading.Lock()
_lib = None
_lib_failed = False


def _load_lib():
    global _lib, _lib_failed
    with _lock:
        if _lib is not None or _lib_failed:
            return _lib
        path = ctypes.util.find_library("crypto") or "libcrypto.so.3"
        try:
            lib = ctypes.CDLL(path)
            for name, restype, argtypes in _SIGNATURES:
                fn = getattr(lib, name)
                fn.restype = restype
                fn.argtypes = argtypes
        except (OSError, AttributeError) as exc:
            logger.info("libcrypto unavailable (%s); using pure-Python arithmetic", exc)
            _lib_failed = True
            return None
        _lib = lib
        return lib


def bind_curve(name: str, p: int, a: int, b: int, q: int, gx: int, gy: int) -> OpenSSLCurve | None:
    lib = _load_lib()
    if lib is None:
        return None
    try:
        return OpenSSLCurve(lib, name, p, a, b, q, gx, gy)
    except OSError as exc:
        logger.info("not binding %s to libcrypto: %s", name, exc)
        return None
