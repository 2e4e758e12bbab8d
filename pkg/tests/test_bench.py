import random

import pytest

from spreadmenot.beacon import gen_key, test_beacon as owns
from spreadmenot.bench import (TimingStats, bench_beacon_generation, bench_exposure_scan, bench_scalar_mul,
                               linear_fit, synthetic_entries)
from spreadmenot.ecc import SECP128R1, SECP256K1, count_scalar_muls


def test_timing_stats_from_known_samples():
    s = TimingStats.from_samples("x", [1.0, 2.0, 3.0, 4.0], muls=8)
    assert s.mean == 2.5
    # sample sd of 1..4 is sqrt(5/3)
    assert s.ci95 == pytest.approx(1.959964 * (5 / 3) ** 0.5 / 2, rel=1e-6)
    assert s.scalar_muls_per_op == 2


def test_linear_fit_exact_line():
    slope, intercept, r2 = linear_fit([1, 2, 3, 4], [3, 5, 7, 9])
    assert (slope, intercept) == pytest.approx((2, 1))
    assert r2 == pytest.approx(1.0)


def test_scalar_mul_bench_counts():
    s = bench_scalar_mul(SECP128R1, 20)
    assert s.n == 20 and s.scalar_muls_per_op == 1 and s.mean > 0


def test_bigger_curve_costs_more():
    small = bench_scalar_mul(SECP128R1, 300)
    big = bench_scalar_mul(SECP256K1, 300)
    assert big.mean > small.mean


def test_pooled_generation_is_multiplication_free_and_faster():
    kp = gen_key(SECP256K1, random.Random(1))
    pooled = bench_beacon_generation(kp, 100, pooled=True)
    unpooled = bench_beacon_generation(kp, 100, pooled=False)
    assert pooled.scalar_muls_per_op == 0
    assert unpooled.scalar_muls_per_op == 3
    assert pooled.mean < unpooled.mean


def test_synthetic_entries_are_valid_stranger_beacons():
    rng = random.Random(3)
    me = gen_key(SECP128R1, rng)
    with count_scalar_muls() as c:
        es = synthetic_entries(SECP128R1, 50, rng, owner=me, owner_entries=2)
    assert c.count <= 8
    assert len(es) == 50
    assert sum(owns(e, me.x) for e in es) == 2
    assert len({e.to_bytes() for e in es}) == 50


def test_scan_fit_is_linear():
    fit = bench_exposure_scan(SECP128R1, (500, 1000, 1500, 2000))
    assert fit.r_squared >= 0.95
    assert fit.slope > 0
    assert fit.matches[-1] == 1
