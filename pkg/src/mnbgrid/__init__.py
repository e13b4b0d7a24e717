"""Bandit-based defence of distribution-grid nodes against attacks.

Modules
-------
attacks     truncated-Poisson attack counts and Gamma beliefs
policies    Hedge(lambda), Thompson-Hedge and restarted EXP3
adversary   variation-bounded cost sequences
regret      regret functionals, bounds and the Monte-Carlo harness
opf         DC optimal power flow and node-outage attack costs
analysis    regression of cumulative variation on time
"""
from .attacks import GammaBelief, NodeSet, TruncatedPoissonModel
from .adversary import CostMatrix, VariationBudget
from .regret import ExperimentConfig, RegretSummary, run_experiment

__version__ = "0.1.0"

__all__ = ["GammaBelief", "NodeSet", "TruncatedPoissonModel", "CostMatrix", "VariationBudget",
           "ExperimentConfig", "RegretSummary", "run_experiment"]
