"""Discrete-event simulation of devices broadcasting, receiving and reporting, with adversaries.

Time is simulated seconds from 0 to ``duration``; device clocks read
``START_TIME + t + skew``. Every run is fully determined by the config (and
its seed): all randomness comes from ``random.Random`` instances seeded from
it, and simultaneous events are processed in insertion order.
"""
from __future__ import annotations

import hashlib
import heapq
import json
import math
import random
from collections import Counter, defaultdict
from dataclasses import asdict, dataclass, field

from ..beacon import gen_key
from ..device import DeviceAgent, Disposition
from ..ecc import get_params
from ..pool import precompute_pool_fill
from ..signed import encode_signed_beacon
from ..wire import EARTH_RADIUS_M, Location
from .config import START_TIME, SimConfig

LOG_VERSION = 1
UPLOAD_TOKEN = "sim-health-authority"


@dataclass
class SimMetrics:
    true_contacts: int = 0
    recorded_contacts: int = 0
    false_contacts_injected: int = 0
    exposures_detected: int = 0
    exposures_expected: int = 0
    false_positive_exposures: int = 0
    missed_exposures: int = 0
    exposure_matches: int = 0
    rejections: dict[str, int] = field(default_factory=dict)
    broadcasts: int = 0
    receptions: int = 0
    adversary_captures: int = 0
    adversary_transmissions: int = 0
    adversary_receptions_accepted: int = 0
    linked_report_entries: int = 0
    signature_verifications: int = 0

    def violations(self) -> list[str]:
        out = []
        if self.recorded_contacts > self.true_contacts + self.false_contacts_injected:
            out.append("recorded_contacts exceeds true_contacts + false_contacts_injected")
        if self.signature_verifications > self.recorded_contacts + self.rejections.get("bad-signature", 0):
            out.append("more signature verifications than promotions")
        return out

    def to_dict(self) -> dict:
        d = asdict(self)
        d["rejections"] = dict(sorted(self.rejections.items()))
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)


class Simulation:
    def __init__(self, config: SimConfig):
        self.cfg = config
        self.params = get_params(config.curve)
        self.rng = random.Random(f"layout:{config.seed}")
        self.noise_rng = random.Random(f"noise:{config.seed}")
        n = config.num_devices
        self.devices: list[DeviceAgent] = []
        for i in range(n):
            dev_rng = random.Random(f"device:{config.seed}:{i}")
            kp = gen_key(self.params, dev_rng)
            pool = precompute_pool_fill(kp, self._windows_needed(), dev_rng) if config.use_pool else None
            self.devices.append(DeviceAgent(
                kp, config.device_config, rng=dev_rng, pool=pool,
                check_freshness=config.check_freshness, check_location=config.check_location,
                check_signature=config.check_signature))
        if config.positions is not None:
            self.pos = [tuple(map(float, p)) for p in config.positions]
        else:
            w, h = config.area
            self.pos = [(self.rng.uniform(0, w), self.rng.uniform(0, h)) for _ in range(n)]
        if config.clock_skews is not None:
            self.skew = list(config.clock_skews)
        else:
            s = config.clock_skew
            self.skew = [self.rng.uniform(-s, s) if s else 0.0 for _ in range(n)]
        self._waypoints = [None] * n

        self.log: list[str] = []
        self.metrics = SimMetrics()
        self._rejections = Counter()
        self._heap: list = []
        self._seq = 0
        self._bids: dict[bytes, str] = {}
        self.owner: dict[bytes, int] = {}
        self.truth_sightings: dict[tuple[int, bytes], list[float]] = defaultdict(list)
        self.promoted: list[tuple[int, bytes]] = []
        self.captured: set[bytes] = set()
        self.store = None

    def _windows_needed(self) -> int:
        return int(self.cfg.duration // self.cfg.device_config.rotation_interval) + 2

    # -- helpers ---------------------------------------------------------------

    def _push(self, t: float, kind: str, data=None):
        heapq.heappush(self._heap, (t, self._seq, kind, data))
        self._seq += 1

    def _emit(self, **rec):
        self.log.append(json.dumps({"v": LOG_VERSION, **rec}, separators=(",", ":")))

    def _bid(self, key: bytes) -> str:
        bid = self._bids.get(key)
        if bid is None:
            bid = self._bids[key] = hashlib.sha256(key).hexdigest()[:16]
        return bid

    def location(self, xy) -> Location:
        lat0, lon0 = self.cfg.origin
        lat = lat0 + math.degrees(xy[1] / EARTH_RADIUS_M)
        lon = lon0 + math.degrees(xy[0] / (EARTH_RADIUS_M * math.cos(math.radians(lat0))))
        return Location.from_degrees(lat, lon)

    def local_time(self, i: int, t: float) -> int:
        return int(math.floor(START_TIME + t + self.skew[i]))

    # -- event handlers ----------------------------------------------------------

    def _on_broadcast(self, t: float, i: int):
        dev = self.devices[i]
        before = dev.current
        sb = dev.broadcast(self.local_time(i, t), self.location(self.pos[i]))
        key = sb.beacon.to_bytes()
        raw = encode_signed_beacon(sb)
        if dev.current is not before:
            self.owner[key] = i
            self._emit(t=round(t, 3), ev="rotate", dev=i, bid=self._bid(key))
        self.metrics.broadcasts += 1
        self._emit(t=round(t, 3), ev="tx", src=f"dev:{i}", bid=self._bid(key))
        self._deliver(t, raw, key, self.pos[i], src=i)
        for a, adv in enumerate(self.cfg.adversaries):
            hit = [k for k, p in enumerate(adv.positions) if math.dist(p, self.pos[i]) <= adv.capture_radius]
            if not hit:
                continue
            self.metrics.adversary_captures += 1
            self.captured.add(key)
            self._emit(t=round(t, 3), ev="capture", adv=a, bid=self._bid(key))
            if adv.kind == "replayer":
                self._push(t + adv.replay_delay, "adv_tx", (a, adv.positions[-1], raw, key))
            elif adv.kind == "relayer":
                for k, p in enumerate(adv.positions):
                    if k not in hit:
                        self._push(t + adv.relay_latency, "adv_tx", (a, p, raw, key))
        self._push(t + self.cfg.broadcast_period, "broadcast", i)

    def _on_adv_tx(self, t: float, data):
        a, xy, raw, key = data
        self.metrics.adversary_transmissions += 1
        self._emit(t=round(t, 3), ev="tx", src=f"adv:{a}", bid=self._bid(key))
        self._deliver(t, raw, key, xy, src=None, boost=self.cfg.adversaries[a].tx_power_boost, adv=a)

    def _deliver(self, t, raw, key, tx_xy, src, boost=0.0, adv=None):
        cfg = self.cfg
        threshold = cfg.device_config.proximity_threshold
        for j, dev in enumerate(self.devices):
            if j == src:
                continue
            d = math.dist(tx_xy, self.pos[j])
            if d > cfg.radio_range + boost:
                continue
            measured = max(0.0, d - boost)
            if cfg.distance_noise_sd:
                measured = max(0.0, measured + self.noise_rng.gauss(0.0, cfg.distance_noise_sd))
            disp = dev.on_receive(raw, self.local_time(j, t), self.location(self.pos[j]), measured)
            self.metrics.receptions += 1
            if disp.rejected:
                self._rejections[disp.reason] += 1
            elif adv is not None:
                self.metrics.adversary_receptions_accepted += 1
            if src is not None and d <= threshold:
                self.truth_sightings[(j, key)].append(t)
            if disp is Disposition.PROMOTED:
                self.promoted.append((j, key))
            self._emit(t=round(t, 3), ev="rx", dst=j, src=f"dev:{src}" if adv is None else f"adv:{adv}",
                       bid=self._bid(key), dist=round(d, 3), mdist=round(measured, 3), disp=disp.value)

    def _new_leg(self):
        w, h = self.cfg.area
        return [(self.rng.uniform(0, w), self.rng.uniform(0, h)), self.rng.uniform(*self.cfg.mobility.speed)]

    def _on_tick(self, t: float):
        # waypoint state per device: [target, speed, resume_at]
        step_t = self.cfg.tick
        for i, (x, y) in enumerate(self.pos):
            wp = self._waypoints[i]
            if wp is None:
                wp = self._waypoints[i] = self._new_leg() + [t]
            target, speed, resume = wp
            if t < resume:
                continue
            dx, dy = target[0] - x, target[1] - y
            dist = math.hypot(dx, dy)
            if dist <= speed * step_t:
                self.pos[i] = target
                wp[:2] = self._new_leg()
                wp[2] = t + self.rng.uniform(*self.cfg.mobility.pause)
            else:
                f = speed * step_t / dist
                self.pos[i] = (x + dx * f, y + dy * f)
        self._push(t + step_t, "tick")

    def _on_maintain(self, t: float):
        for i, dev in enumerate(self.devices):
            dev.maintain(self.local_time(i, t))
        self._push(t + self.cfg.device_config.rotation_interval, "maintain")

    # -- run -------------------------------------------------------------------

    def run(self) -> tuple[list[str], SimMetrics]:
        cfg = self.cfg
        self._emit(t=0.0, ev="start", seed=cfg.seed, curve=cfg.curve, devices=cfg.num_devices,
                   extension=cfg.extension_enabled)
        period_ms = max(1, int(cfg.broadcast_period * 1000))
        for i in range(cfg.num_devices):
            self._push(self.rng.randrange(period_ms) / 1000, "broadcast", i)
        if cfg.mobility.kind == "waypoint":
            self._push(0.0, "tick")
        self._push(cfg.device_config.rotation_interval, "maintain")
        handlers = {"broadcast": self._on_broadcast, "adv_tx": self._on_adv_tx,
                    "tick": lambda t, _: self._on_tick(t), "maintain": lambda t, _: self._on_maintain(t)}
        while self._heap and self._heap[0][0] <= cfg.duration:
            t, _, kind, data = heapq.heappop(self._heap)
            handlers[kind](t, data)
        self._finish_contacts()
        if cfg.infected is not None or cfg.infected_fraction > 0:
            self._report_and_check()
        self.metrics.rejections = dict(sorted(self._rejections.items()))
        self.metrics.signature_verifications = sum(d.signature_verifications for d in self.devices)
        self._emit(t=round(cfg.duration, 3), ev="end", metrics=self.metrics.to_dict())
        return self.log, self.metrics

    def truth_set(self) -> set[tuple[int, bytes]]:
        dc = self.cfg.device_config
        return {k for k, ts in self.truth_sightings.items()
                if len(ts) >= dc.significance_min_receptions
                and ts[-1] - ts[0] >= dc.significance_min_duration}

    def _finish_contacts(self):
        truth = self.truth_set()
        self._truth = truth
        self.metrics.true_contacts = len(truth)
        self.metrics.recorded_contacts = len(self.promoted)
        self.metrics.false_contacts_injected = sum(1 for p in self.promoted if p not in truth)

    def _report_and_check(self):
        from ..authority.store import ReportStore

        cfg = self.cfg
        n = cfg.num_devices
        if cfg.infected is not None:
            infected = sorted(set(cfg.infected))
        else:
            infected = sorted(self.rng.sample(range(n), max(1, round(cfg.infected_fraction * n))))
        self.infected = infected
        now = START_TIME + int(cfg.duration)
        self.store = ReportStore(self.params, tokens={UPLOAD_TOKEN})
        for i in infected:
            report = self.devices[i].prepare_report()
            rid = self.store.submit_report(UPLOAD_TOKEN, report.entries, now=now)
            self._emit(t=round(cfg.duration, 3), ev="report", dev=i, entries=len(report), report_id=rid)
            self.metrics.linked_report_entries += sum(
                1 for e in report.entries if e.to_bytes() in self.captured)
        reports = list(self.store.iter_reports())
        expected = {self.owner[key] for (j, key) in self._truth
                    if j in infected and self.owner.get(key, j) != j}
        detected = set()
        for j, dev in enumerate(self.devices):
            matches = dev.check_exposure(reports)
            self.metrics.exposure_matches += len(matches)
            if matches:
                detected.add(j)
            self._emit(t=round(cfg.duration, 3), ev="exposure", dev=j, matches=len(matches))
        self.metrics.exposures_expected = len(expected)
        self.metrics.exposures_detected = len(detected & expected)
        self.metrics.false_positive_exposures = len(detected - expected)
        self.metrics.missed_exposures = len(expected - detected)


def run_simulation(config: SimConfig) -> tuple[list[str], SimMetrics]:
    return Simulation(config).run()
