"""Windowed-DAG proof-of-stake protocol simulator with a chain baseline."""
from .dag import Block, BlockStore, DagView, Payload, EMPTY
from .sim import SimConfig, RunTrace, run_simulation

__all__ = ["Block", "BlockStore", "DagView", "Payload", "EMPTY",
           "SimConfig", "RunTrace", "run_simulation"]
__version__ = "0.1.0"
