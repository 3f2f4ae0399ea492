"""OTFS transmit and receive chain with rectangular pulses.

All transforms use unitary scaling so that the cascade
sfft(wigner(heisenberg(isfft(X)))) is exactly the identity and every
stage preserves energy. Time samples are ordered u = n*M + a (slot n,
sample a within the slot), consistent with the grid vectorization.
"""

from __future__ import annotations

import numpy as np

from .frame import FrameConfig


def isfft(X: np.ndarray) -> np.ndarray:
    """Delay-Doppler -> time-frequency: Xbar = F_M X F_N^H (unitary)."""
    X = np.asarray(X)
    M, N = X.shape
    tmp = np.fft.fft(X, axis=0) / np.sqrt(M)
    return np.fft.ifft(tmp, axis=1) * np.sqrt(N)


def sfft(Ybar: np.ndarray) -> np.ndarray:
    """Time-frequency -> delay-Doppler: Y = F_M^H Ybar F_N (unitary)."""
    Ybar = np.asarray(Ybar)
    M, N = Ybar.shape
    tmp = np.fft.ifft(Ybar, axis=0) * np.sqrt(M)
    return np.fft.fft(tmp, axis=1) / np.sqrt(N)


def heisenberg(Xbar: np.ndarray, cfg: FrameConfig) -> np.ndarray:
    """Time-frequency grid -> length-M*N time signal.

    With the unit rectangular transmit pulse the transform reduces to a
    unitary M-point inverse DFT of each time-slot column.
    """
    Xbar = np.asarray(Xbar)
    S = np.fft.ifft(Xbar, axis=0) * np.sqrt(cfg.M)
    return S.ravel(order="F")


def wigner(r: np.ndarray, cfg: FrameConfig) -> np.ndarray:
    """Time signal (no CP) -> time-frequency grid; inverse of heisenberg."""
    r = np.asarray(r)
    if r.size != cfg.M * cfg.N:
        raise ValueError(f"signal length {r.size} != M*N = {cfg.M * cfg.N}")
    R = r.reshape((cfg.M, cfg.N), order="F")
    return np.fft.fft(R, axis=0) / np.sqrt(cfg.M)


def add_cp(s: np.ndarray, L_cp: int) -> np.ndarray:
    """Prepend a cyclic prefix: the last L_cp samples (cyclically) of s."""
    s = np.asarray(s)
    if L_cp == 0:
        return s.copy()
    idx = np.arange(s.size - L_cp, s.size) % s.size
    return np.concatenate([s[idx], s])


def remove_cp(r: np.ndarray, L_cp: int) -> np.ndarray:
    return np.asarray(r)[L_cp:]


def modulate(X: np.ndarray, cfg: FrameConfig) -> np.ndarray:
    """Full TX chain without CP: heisenberg(isfft(X))."""
    return heisenberg(isfft(X), cfg)


def demodulate(r: np.ndarray, cfg: FrameConfig) -> np.ndarray:
    """Full RX chain: sfft(wigner(r))."""
    return sfft(wigner(r, cfg))
