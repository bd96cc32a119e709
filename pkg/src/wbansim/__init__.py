"""Multi-hop body-area-network simulator with an interference-avoiding MAC,
baseline schemes, an energy model and outage-probability analysis."""

from .config import SimConfig, load_config
from .engine import Engine, SimResult, run

__version__ = "0.1.0"

__all__ = ["SimConfig", "load_config", "Engine", "SimResult", "run"]
