"""Micro-benchmarks: point multiplication, online beacon generation, exposure scanning.

Absolute timings depend on the machine; callers should only compare them
with each other (curve ordering, pooled vs unpooled, linear scan growth).
"""
from __future__ import annotations

import gc
import math
import random
import statistics
import time
from dataclasses import dataclass

from .beacon import Beacon, KeyPair, gen_beacon, gen_key
from .device import check_exposure
from .ecc import GroupParams, count_scalar_muls, random_nonzero_scalar, scalar_mul
from .pool import BeaconPool, signed_beacon_from_pool
from .report import PublishedReport
from .signed import sign_beacon
from .wire import Location

Z95 = statistics.NormalDist().inv_cdf(0.975)


@dataclass(frozen=True)
class TimingStats:
    name: str
    n: int
    mean: float  # seconds per operation
    ci95: float  # half-width of the 95% confidence interval
    scalar_muls_per_op: float = 0.0

    @classmethod
    def from_samples(cls, name: str, samples: list[float], muls: int = 0) -> TimingStats:
        n = len(samples)
        sd = statistics.stdev(samples) if n > 1 else 0.0
        return cls(name, n, statistics.fmean(samples), Z95 * sd / math.sqrt(n), muls / n)

    def to_dict(self) -> dict:
        return {"name": self.name, "n": self.n, "mean_s": self.mean, "ci95_s": self.ci95,
                "scalar_muls_per_op": self.scalar_muls_per_op}


@dataclass(frozen=True)
class ScanFit:
    sizes: tuple[int, ...]
    seconds: tuple[float, ...]
    slope: float  # seconds per entry
    intercept: float
    r_squared: float
    matches: tuple[int, ...]

    def to_dict(self) -> dict:
        return {"sizes": list(self.sizes), "seconds": list(self.seconds), "slope_s": self.slope,
                "intercept_s": self.intercept, "r_squared": self.r_squared, "matches": list(self.matches)}


def _time(fn, n: int) -> tuple[list[float], int]:
    samples = []
    with count_scalar_muls() as counter:
        for _ in range(n):
            t0 = time.perf_counter()
            fn()
            samples.append(time.perf_counter() - t0)
    return samples, counter.count


def bench_scalar_mul(params: GroupParams, n: int = 1000, rng=None) -> TimingStats:
    rng = rng or random.Random(0)
    scalars = [random_nonzero_scalar(params, rng) for _ in range(n)]
    G = params.G
    it = iter(scalars)
    samples, muls = _time(lambda: scalar_mul(next(it), G), n)
    return TimingStats.from_samples(f"scalar-mul/{params.curve_id.value}", samples, muls)


def bench_beacon_generation(keypair: KeyPair, n: int = 200, *, pooled: bool, rng=None) -> TimingStats:
    """Time producing one signed beacon ready to broadcast.

    The pooled arm only times the online step; filling the pool happens
    beforehand and is not counted.
    """
    rng = rng or random.Random(0)
    loc = Location.from_degrees(45.0, 7.0)
    if pooled:
        pool = BeaconPool(keypair)
        pool.fill(n, rng)
        fn = lambda: signed_beacon_from_pool(pool, loc, 1_700_000_000)  # noqa: E731
    else:
        def fn():
            beacon, r = gen_beacon(keypair.P, rng)
            sign_beacon(beacon, r, keypair.x, loc, 1_700_000_000)
    samples, muls = _time(fn, n)
    arm = "pooled" if pooled else "unpooled"
    return TimingStats.from_samples(f"beacon-{arm}/{keypair.params.curve_id.value}", samples, muls)


def synthetic_entries(params: GroupParams, count: int, rng=None, *, owner: KeyPair | None = None,
                      owner_entries: int = 0) -> list[Beacon]:
    """``count`` valid beacons, cheap to build: consecutive blindings of one stranger key
    (each entry is the previous plus (G, P)), with ``owner_entries`` beacons of ``owner`` mixed in."""
    rng = rng or random.Random(0)
    stranger = gen_key(params, rng)
    cur, _ = gen_beacon(stranger.P, rng)
    G, P = params.G, stranger.P
    out = []
    for _ in range(count - owner_entries):
        out.append(cur)
        cur = Beacon(cur.U + G, cur.V + P)
    for _ in range(owner_entries):
        out.insert(rng.randrange(len(out) + 1), gen_beacon(owner.P, rng)[0])
    return out


def linear_fit(xs, ys) -> tuple[float, float, float]:
    """(slope, intercept, R^2) of an ordinary least squares line."""
    slope, intercept = statistics.linear_regression(xs, ys)
    r = statistics.correlation(xs, ys)
    return slope, intercept, r * r


def bench_exposure_scan(params: GroupParams, sizes=(2500, 5000, 7500, 10000), rng=None,
                        *, owner_entries: int = 1, repeats: int = 3) -> ScanFit:
    """Scan time per report size, best of ``repeats`` runs with the collector paused (as timeit does)."""
    rng = rng or random.Random(0)
    me = gen_key(params, rng)
    entries = synthetic_entries(params, max(sizes), rng, owner=me, owner_entries=owner_entries)
    seconds, matches = [], []
    for size in sizes:
        report = PublishedReport(entries[:size], report_id="bench")
        best = math.inf
        for _ in range(repeats):
            gc_was_on = gc.isenabled()
            gc.disable()
            try:
                t0 = time.perf_counter()
                found = check_exposure(me, [report])
                best = min(best, time.perf_counter() - t0)
            finally:
                if gc_was_on:
                    gc.enable()
        seconds.append(best)
        matches.append(len(found))
    slope, intercept, r2 = linear_fit(list(sizes), seconds)
    return ScanFit(tuple(sizes), tuple(seconds), slope, intercept, r2, tuple(matches))
