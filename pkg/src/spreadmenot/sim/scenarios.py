"""Ready-made attack and end-to-end scenarios, each runnable with and without the signed-beacon checks."""
from __future__ import annotations

import dataclasses

from ..device import DeviceConfig
from .config import AdversaryConfig, SimConfig
from .engine import SimMetrics, run_simulation


def replay_scenario(seed: int = 0, *, replay_delay: float = 60.0, tolerance: float = 10.0,
                    same_location: bool = False, curve: str = "toy",
                    duration: float = 1800.0) -> SimConfig:
    """A source device at the origin and a victim 50 m away.

    The replayer captures next to the source and re-broadcasts the captured
    frames beside the victim (or, with ``same_location``, from where it
    captured them) with enough power to look 0 m away.
    """
    positions = ((1.0, 0.0),) if same_location else ((1.0, 0.0), (50.0, 0.5))
    return SimConfig(
        seed=seed, curve=curve, num_devices=2, positions=((0.0, 0.0), (50.0, 0.0)),
        duration=duration, device_config=DeviceConfig(time_sync_tolerance=tolerance),
        adversaries=(AdversaryConfig("replayer", positions, capture_radius=5.0,
                                     replay_delay=replay_delay, tx_power_boost=60.0),))


def relay_scenario(seed: int = 0, *, separation: float = 10_000.0, tolerance: float = 500.0,
                   relay_latency: float = 0.0, curve: str = "toy",
                   duration: float = 1800.0) -> SimConfig:
    """Two devices ``separation`` meters apart, a relayer with an antenna next to each."""
    return SimConfig(
        seed=seed, curve=curve, num_devices=2,
        positions=((0.0, 0.0), (separation + 0.5, 0.0)), duration=duration,
        device_config=DeviceConfig(location_tolerance=tolerance),
        adversaries=(AdversaryConfig("relayer", ((1.0, 0.0), (separation, 0.0)), capture_radius=5.0,
                                     relay_latency=relay_latency, tx_power_boost=5.0),))


def end_to_end_scenario(seed: int = 0, *, num_devices: int = 10, infected: int = 1,
                        curve: str = "secp256k1", duration: float = 1200.0,
                        area: tuple[float, float] = (8.0, 8.0)) -> SimConfig:
    """Static devices scattered over a small room; ``infected`` of them report at the end."""
    return SimConfig(seed=seed, curve=curve, num_devices=num_devices, area=area,
                     duration=duration, infected_fraction=infected / num_devices)


def run_replay_scenario(config: SimConfig) -> SimMetrics:
    if not any(a.kind == "replayer" for a in config.adversaries):
        raise ValueError("scenario has no replayer")
    return run_simulation(config)[1]


def run_relay_scenario(config: SimConfig) -> SimMetrics:
    if not any(a.kind == "relayer" for a in config.adversaries):
        raise ValueError("scenario has no relayer")
    return run_simulation(config)[1]


def run_end_to_end(config: SimConfig, infected_fraction: float | None = None) -> SimMetrics:
    if infected_fraction is not None:
        if not 0 < infected_fraction <= 1:
            raise ValueError("infected_fraction must be in (0, 1]")
        config = dataclasses.replace(config, infected_fraction=infected_fraction, infected=None)
    if config.infected is None and config.infected_fraction <= 0:
        raise ValueError("end-to-end runs need at least one infected device")
    return run_simulation(config)[1]


def run_both_arms(config: SimConfig) -> tuple[SimMetrics, SimMetrics]:
    """(checks on, checks off) for the same seeded scenario."""
    on = config if config.extension_enabled else dataclasses.replace(
        config, check_freshness=True, check_location=True, check_signature=True)
    return run_simulation(on)[1], run_simulation(on.ablated())[1]
