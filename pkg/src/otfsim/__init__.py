"""OTFS link-level simulation with block-wise index modulation.

Subpackages implement the transmit/receive chain (modem), bit-to-grid
mapping (immap), time-varying multipath channels and their delay-Doppler
effective matrices (channel), ML and message-passing detectors (detect),
analytical BER upper bounds (bounds), and a Monte Carlo harness with CLI
(harness, cli).
"""

from .frame import BPSK, QPSK, FrameConfig, devectorize, vectorize

__all__ = ["BPSK", "QPSK", "FrameConfig", "vectorize", "devectorize"]
__version__ = "0.1.0"
