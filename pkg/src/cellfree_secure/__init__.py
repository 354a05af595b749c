"""Secure downlink power control for cell-free massive MIMO under a
pilot-spoofing eavesdropper.

Modules
-------
netgen       deployment geometry, path loss, shadowing and noise power
estimation   uplink training, MMSE estimates and attack detection
sinr         SNR, rate and secrecy-rate evaluation
cvx          interior-point solver for the convex subproblems
pathfollow   successive convex approximation for the four programs
closedform   closed-form solutions under equal power allocation
harness      Monte Carlo sweeps, CSV output and brute-force oracles
"""
from .netgen import ConfigError, SimConfig

__all__ = ["ConfigError", "SimConfig"]
__version__ = "0.1.0"
