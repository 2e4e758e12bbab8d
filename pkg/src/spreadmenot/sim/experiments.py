"""The beacon indistinguishability game, played by concrete distinguishers.

Each trial: two fresh key pairs; the adversary sees both public keys and may
request beacons under either key before and after the challenge; the
challenger flips b and emits one beacon under P_b; the adversary guesses.
A distinguisher that learns nothing wins about half the time.
"""
from __future__ import annotations

import random
from dataclasses import dataclass

from ..beacon import Beacon, gen_beacon, gen_key, test_beacon
from ..ecc import CurveId, GroupElement, get_params, toy_discrete_log

BAND = (0.47, 0.53)


class Distinguisher:
    """Base adversary: records what it is shown and guesses at random."""

    name = "random"

    def __init__(self, rng: random.Random):
        self.rng = rng

    def start(self, P0: GroupElement, P1: GroupElement, secrets=None):
        self.P = (P0, P1)
        self.seen: tuple[list[Beacon], list[Beacon]] = ([], [])

    def observe(self, which: int, beacon: Beacon):
        self.seen[which].append(beacon)

    def guess(self, challenge: Beacon) -> int:
        return self.rng.getrandbits(1)

    def _decide(self, hits: tuple[bool, bool]) -> int:
        if hits[0] != hits[1]:
            return 0 if hits[0] else 1
        return self.rng.getrandbits(1)


class ByteEquality(Distinguisher):
    """Looks for the challenge bytes among previously requested beacons."""

    name = "byte-equality"

    def guess(self, challenge):
        raw = challenge.to_bytes()
        return self._decide(tuple(any(b.to_bytes() == raw for b in self.seen[w]) for w in (0, 1)))


class ElementEquality(Distinguisher):
    """Compares challenge components, as group elements, with every element tied to each key."""

    name = "element-equality"

    def guess(self, challenge):
        hits = []
        for w in (0, 1):
            pool = {self.P[w]}
            for b in self.seen[w]:
                pool.update((b.U, b.V))
            hits.append(challenge.U in pool or challenge.V in pool)
        return self._decide(tuple(hits))


class ComponentRatio(Distinguisher):
    """Checks whether U_c - U_j and V_c - V_j coincide for a reference beacon j of either key."""

    name = "component-ratio"

    def guess(self, challenge):
        hits = []
        for w in (0, 1):
            hit = False
            for b in self.seen[w]:
                du, dv = challenge.U - b.U, challenge.V - b.V
                if not du.is_identity and not dv.is_identity and du.to_bytes() == dv.to_bytes():
                    hit = True
            hits.append(hit)
        return self._decide(tuple(hits))


class KeyOracle(Distinguisher):
    """Harness sanity check: handed x0, it simply runs Test."""

    name = "key-oracle"

    def start(self, P0, P1, secrets=None):
        super().start(P0, P1)
        self.x0 = secrets[0]

    def guess(self, challenge):
        return 0 if test_beacon(challenge, self.x0) else 1


class ToyDiscreteLog(Distinguisher):
    """Solves the discrete log of U by exhaustive search; only possible on the TOY group."""

    name = "toy-dlog"

    def guess(self, challenge):
        r = toy_discrete_log(challenge.U, challenge.params.G)
        return 0 if r * self.P[0] == challenge.V else 1


DISTINGUISHERS = {cls.name: cls for cls in
                  (ByteEquality, ElementEquality, ComponentRatio, KeyOracle, ToyDiscreteLog)}
PASSIVE = ("byte-equality", "element-equality", "component-ratio")


@dataclass(frozen=True)
class ExperimentResult:
    distinguisher: str
    curve: str
    trials: int
    successes: int

    @property
    def rate(self) -> float:
        return self.successes / self.trials

    def within_band(self, band=BAND) -> bool:
        return band[0] <= self.rate <= band[1]

    def to_dict(self) -> dict:
        return {"distinguisher": self.distinguisher, "curve": self.curve, "trials": self.trials,
                "successes": self.successes, "rate": self.rate}


def run_indistinguishability_experiment(trials: int, distinguisher: str, curve="secp256k1", *,
                                        seed: int = 0, queries_before: int = 1,
                                        queries_after: int = 1) -> ExperimentResult:
    if trials < 1:
        raise ValueError("trials must be positive")
    if distinguisher not in DISTINGUISHERS:
        raise ValueError(f"unknown distinguisher {distinguisher!r}; choose from {', '.join(DISTINGUISHERS)}")
    params = get_params(curve)
    if distinguisher == "toy-dlog" and params.curve_id is not CurveId.TOY:
        raise ValueError("the discrete-log distinguisher only runs on the TOY group")
    challenger = random.Random(f"challenger:{seed}:{distinguisher}")
    adversary = DISTINGUISHERS[distinguisher](random.Random(f"adversary:{seed}:{distinguisher}"))
    wins = 0
    for _ in range(trials):
        k0 = gen_key(params, challenger)
        k1 = gen_key(params, challenger)
        while k1.x == k0.x:  # two distinct keys; only ever triggers on the toy group
            k1 = gen_key(params, challenger)
        keys = (k0, k1)
        adversary.start(k0.P, k1.P, secrets=(k0.x, k1.x))
        for _ in range(queries_before):
            for w in (0, 1):
                adversary.observe(w, gen_beacon(keys[w].P, challenger)[0])
        b = challenger.getrandbits(1)
        challenge, _ = gen_beacon(keys[b].P, challenger)
        for _ in range(queries_after):
            for w in (0, 1):
                adversary.observe(w, gen_beacon(keys[w].P, challenger)[0])
        wins += adversary.guess(challenge) == b
    return ExperimentResult(distinguisher, params.curve_id.value, trials, wins)
