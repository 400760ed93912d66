"""Explicit-state model checker for a preemptive ARMv7-M RTOS kernel model."""
from .config import Config, load_config, make_config
from .explorer import SearchLimits, Verdict, VerdictKind, dfs_safety
from .model import KernelModel
from .workload import Mutation

__all__ = [
    "Config",
    "KernelModel",
    "Mutation",
    "SearchLimits",
    "Verdict",
    "VerdictKind",
    "dfs_safety",
    "load_config",
    "make_config",
]
