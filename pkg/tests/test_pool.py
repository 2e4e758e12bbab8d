import random
import threading

import pytest

from spreadmenot.beacon import gen_key, test_beacon as owns
from spreadmenot.ecc import SECP256K1, TOY, count_scalar_muls
from spreadmenot.pool import BeaconPool, PoolExhausted, precompute_pool_fill, signed_beacon_from_pool
from spreadmenot.signed import verify_signed_beacon
from spreadmenot.wire import Location

HERE = Location.from_degrees(45.0, 7.0)


def test_online_path_performs_no_multiplications(std_curve):
    kp = gen_key(std_curve, random.Random(1))
    pool = precompute_pool_fill(kp, 5, random.Random(2))
    with count_scalar_muls() as c:
        signed = [signed_beacon_from_pool(pool, HERE, 1_700_000_000 + i) for i in range(5)]
    assert c.count == 0
    for sb, r in signed:
        assert verify_signed_beacon(sb)
        assert owns(sb.beacon, kp.x)
        assert sb.beacon.U == r * std_curve.G


def test_fill_costs_three_multiplications_per_entry():
    kp = gen_key(SECP256K1, random.Random(1))
    with count_scalar_muls() as c:
        precompute_pool_fill(kp, 4, random.Random(2))
    assert c.count == 12


def test_entries_are_single_use():
    kp = gen_key(TOY, random.Random(1))
    pool = precompute_pool_fill(kp, 3, random.Random(2))
    drawn = [signed_beacon_from_pool(pool, HERE, 1)[0] for _ in range(3)]
    assert len(pool) == 0
    with pytest.raises(PoolExhausted):
        signed_beacon_from_pool(pool, HERE, 1)
    assert len(drawn) == 3


def test_concurrent_draws_never_share_an_entry():
    kp = gen_key(SECP256K1, random.Random(1))
    pool = BeaconPool(kp)
    pool.fill(200, random.Random(2))
    got, lock = [], threading.Lock()

    def worker():
        while True:
            try:
                t = pool.draw()
            except PoolExhausted:
                return
            with lock:
                got.append(t.r)

    threads = [threading.Thread(target=worker) for _ in range(4)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert len(got) == 200 and len(set(got)) == 200


def test_fill_rejects_nonpositive_counts():
    with pytest.raises(ValueError):
        BeaconPool(gen_key(TOY, x=3)).fill(0)
