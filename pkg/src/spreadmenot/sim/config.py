"""Scenario configuration, loadable from YAML (or JSON) files."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import yaml

from ..device import DeviceConfig
from ..ecc import CurveId

ADVERSARY_KINDS = ("eavesdropper", "replayer", "relayer")
START_TIME = 1_700_000_000  # Unix time of simulation t=0


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class AdversaryConfig:
    kind: str
    positions: tuple[tuple[float, float], ...]
    capture_radius: float = 10.0
    replay_delay: float = 60.0
    relay_latency: float = 0.0
    tx_power_boost: float = 0.0

    def __post_init__(self):
        if self.kind not in ADVERSARY_KINDS:
            raise ConfigError(f"unknown adversary kind {self.kind!r}")
        if not self.positions:
            raise ConfigError(f"{self.kind} needs at least one position")
        if self.kind == "relayer" and len(self.positions) < 2:
            raise ConfigError("relayer needs at least two positions")
        if min(self.capture_radius, self.replay_delay, self.relay_latency, self.tx_power_boost) < 0:
            raise ConfigError("adversary distances and delays must be non-negative")


@dataclass(frozen=True)
class Mobility:
    kind: str = "static"
    speed: tuple[float, float] = (0.5, 1.5)
    pause: tuple[float, float] = (0.0, 120.0)

    def __post_init__(self):
        if self.kind not in ("static", "waypoint"):
            raise ConfigError(f"unknown mobility model {self.kind!r}")
        if not 0 < self.speed[0] <= self.speed[1]:
            raise ConfigError("speed range must be positive and ordered")


@dataclass(frozen=True)
class SimConfig:
    seed: int = 0
    curve: str = CurveId.TOY.value
    num_devices: int = 2
    area: tuple[float, float] = (100.0, 100.0)
    positions: tuple[tuple[float, float], ...] | None = None
    mobility: Mobility = field(default_factory=Mobility)
    tick: float = 1.0
    duration: float = 1800.0
    broadcast_period: float = 2.0
    radio_range: float = 100.0
    distance_noise_sd: float = 0.0
    clock_skew: float = 0.0  # each device drifts by a fixed offset in [-skew, +skew]
    clock_skews: tuple[float, ...] | None = None
    origin: tuple[float, float] = (45.0, 7.0)
    device_config: DeviceConfig = field(default_factory=DeviceConfig)
    adversaries: tuple[AdversaryConfig, ...] = ()
    # ablation switches, applied to every device
    check_freshness: bool = True
    check_location: bool = True
    check_signature: bool = True
    use_pool: bool = False
    infected_fraction: float = 0.0
    infected: tuple[int, ...] | None = None

    def __post_init__(self):
        if not 0 <= self.seed < 1 << 64:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        CurveId.parse(self.curve)
        if self.num_devices < 1:
            raise ConfigError("num_devices must be positive")
        if self.positions is not None and len(self.positions) != self.num_devices:
            raise ConfigError("positions must list one coordinate per device")
        if self.clock_skews is not None and len(self.clock_skews) != self.num_devices:
            raise ConfigError("clock_skews must list one offset per device")
        for name in ("tick", "duration", "broadcast_period", "radio_range"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if self.distance_noise_sd < 0 or self.clock_skew < 0:
            raise ConfigError("noise and skew must be non-negative")
        if not 0 <= self.infected_fraction <= 1:
            raise ConfigError("infected_fraction must be in [0, 1]")
        if self.infected is not None and any(not 0 <= i < self.num_devices for i in self.infected):
            raise ConfigError("infected indices out of range")

    @property
    def extension_enabled(self) -> bool:
        return self.check_freshness and self.check_location and self.check_signature

    def ablated(self) -> SimConfig:
        """Same scenario with timestamp, location and signature checks all off."""
        return dataclasses.replace(self, check_freshness=False, check_location=False,
                                   check_signature=False)

    def replace(self, **changes) -> SimConfig:
        return dataclasses.replace(self, **changes)

    @classmethod
    def from_dict(cls, data: dict) -> SimConfig:
        data = dict(data)
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        try:
            if "device_config" in data:
                data["device_config"] = DeviceConfig(**data["device_config"])
            if "mobility" in data:
                mob = data["mobility"]
                mob = {"kind": mob} if isinstance(mob, str) else dict(mob)
                for k in ("speed", "pause"):
                    if k in mob:
                        mob[k] = tuple(mob[k])
                data["mobility"] = Mobility(**mob)
            if "adversaries" in data:
                data["adversaries"] = tuple(
                    AdversaryConfig(**{**a, "positions": tuple(tuple(p) for p in a["positions"])})
                    for a in data["adversaries"])
            for k in ("area", "origin"):
                if k in data:
                    data[k] = tuple(data[k])
            if data.get("positions") is not None:
                data["positions"] = tuple(tuple(p) for p in data["positions"])
            for k in ("clock_skews", "infected"):
                if data.get(k) is not None:
                    data[k] = tuple(data[k])
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    @classmethod
    def from_file(cls, path) -> SimConfig:
        with open(path) as fh:
            data = yaml.safe_load(fh)
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: expected a mapping at top level")
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)
