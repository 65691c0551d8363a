"""Deterministic multi-NSP simulation harness and benchmarks."""

from .network import BusLivelock, EventBus, Network, Trace, run_scenario
from .scenario import Scenario, ScenarioError, load_scenario, scenario_from_dict
