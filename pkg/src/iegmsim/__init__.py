"""Closed-loop simulation of an abstract conduction network, a moving-dipole
intracardiac electrogram layer and a DDD pacemaker."""

from .engine import run_simulation
from .scenario import Scenario, load_scenario, load_scenario_file
from .trace import Trace, summarize_events, write_trace_csv

__all__ = ["run_simulation", "Scenario", "load_scenario", "load_scenario_file", "Trace",
           "summarize_events", "write_trace_csv"]
__version__ = "0.1.0"
