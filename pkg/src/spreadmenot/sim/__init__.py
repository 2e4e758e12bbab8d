from .config import AdversaryConfig, ConfigError, Mobility, SimConfig
from .engine import SimMetrics, Simulation, run_simulation
from .experiments import DISTINGUISHERS, ExperimentResult, run_indistinguishability_experiment
from .scenarios import (end_to_end_scenario, relay_scenario, replay_scenario, run_both_arms,
                        run_end_to_end, run_relay_scenario, run_replay_scenario)

__all__ = [
    "AdversaryConfig", "ConfigError", "DISTINGUISHERS", "ExperimentResult", "Mobility",
    "SimConfig", "SimMetrics", "Simulation", "end_to_end_scenario", "relay_scenario",
    "replay_scenario", "run_both_arms", "run_end_to_end", "run_indistinguishability_experiment",
    "run_relay_scenario", "run_replay_scenario", "run_simulation",
]
