"""Verification harnesses built on the simulation engine."""

from pssclock.checkers.clt import ExperimentConfig, TestReport, clt_test, fclt_covariance_test, lln_check, run_experiment
from pssclock.checkers.ergodicity import ErgodicityChecker, ErgodicityVerdict, quenched_criterion
from pssclock.checkers.mellin import MellinChecker, MellinFunction

__all__ = [
    "ExperimentConfig",
    "TestReport",
    "clt_test",
    "fclt_covariance_test",
    "lln_check",
    "run_experiment",
    "ErgodicityChecker",
    "ErgodicityVerdict",
    "quenched_criterion",
    "MellinChecker",
    "MellinFunction",
]
