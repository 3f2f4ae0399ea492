"""Frame geometry, subframe/block indexing, and the grid<->vector mapping.

An OTFS-IM frame is an M x N delay-Doppler grid (M delay bins, N Doppler
bins) tiled by J = (M/M_hat)*(N/N_hat) subframes of size M_hat x N_hat.
Each subframe is split into blocks along the delay dimension (DeIM), the
Doppler dimension (DoIM), or into individual units (RandomIM baseline).

Index conventions: delay/Doppler/vector indices are 0-based; subframe
index beta and global block index f are 1-based.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Bit-word-indexed constellations, unit average power.
# BPSK: 0 -> +1, 1 -> -1.  QPSK (Gray): 00 -> (1+j)/sqrt2, 01 -> (1-j)/sqrt2,
# 10 -> (-1+j)/sqrt2, 11 -> (-1-j)/sqrt2.
BPSK = np.array([1.0 + 0.0j, -1.0 + 0.0j])
QPSK = np.array([1 + 1j, 1 - 1j, -1 + 1j, -1 - 1j]) / np.sqrt(2.0)

SCHEMES = ("deim", "doim", "randim", "plain")


@dataclass(frozen=True)
class FrameConfig:
    """Static dimensions and scheme parameters of an OTFS-IM frame.

    Attributes
    ----------
    M, N : int
        Delay bins (subcarriers) and Doppler bins (time slots).
    delta_f : float
        Subcarrier spacing in Hz; the slot duration is T = 1/delta_f.
    M_hat, N_hat : int
        Delay/Doppler bins per subframe; must divide M and N.
    k_hat : int
        Active blocks per subframe (DeIM/DoIM).
    scheme : str
        One of "deim", "doim", "randim", "plain".
    mod_order : int
        Constellation size, 2 (BPSK) or 4 (QPSK).
    carrier_hz : float
        Carrier frequency, used for Doppler generation.
    n_act : int
        RandomIM only: active resource units per subframe.
    """

    M: int
    N: int
    delta_f: float = 15e3
    M_hat: int = 4
    N_hat: int = 4
    k_hat: int = 1
    scheme: str = "deim"
    mod_order: int = 4
    carrier_hz: float = 4e9
    n_act: int = 2

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}, expected one of {SCHEMES}")
        if self.M <= 0 or self.N <= 0:
            raise ValueError("M and N must be positive")
        if self.M % self.M_hat or self.N % self.N_hat:
            raise ValueError("M_hat/N_hat must divide M/N")
        if self.scheme == "deim" and not 1 <= self.k_hat <= self.M_hat:
            raise ValueError("DeIM requires 1 <= k_hat <= M_hat")
        if self.scheme == "doim" and not 1 <= self.k_hat <= self.N_hat:
            raise ValueError("DoIM requires 1 <= k_hat <= N_hat")
        if self.scheme == "randim" and not 1 <= self.n_act <= self.M_hat * self.N_hat:
            raise ValueError("RandomIM requires 1 <= n_act <= M_hat*N_hat")
        if self.mod_order not in (2, 4):
            raise ValueError("mod_order must be 2 (BPSK) or 4 (QPSK)")
        if self.delta_f <= 0:
            raise ValueError("delta_f must be positive")

    # --- derived timing ---

    @property
    def T(self) -> float:
        """Slot duration in seconds; T * delta_f = 1."""
        return 1.0 / self.delta_f

    @property
    def T_s(self) -> float:
        """Sample interval 1/(M*delta_f)."""
        return 1.0 / (self.M * self.delta_f)

    # --- derived geometry ---

    @property
    def M_bar(self) -> int:
        return self.M // self.M_hat

    @property
    def N_bar(self) -> int:
        return self.N // self.N_hat

    @property
    def J(self) -> int:
        """Number of subframes."""
        return self.M_bar * self.N_bar

    @property
    def has_im(self) -> bool:
        return self.scheme != "plain"

    @property
    def blocks_per_subframe(self) -> int:
        if self.scheme == "deim":
            return self.M_hat
        if self.scheme == "doim":
            return self.N_hat
        if self.scheme == "randim":
            return self.M_hat * self.N_hat
        return 1  # plain: one all-active pseudo-block

    @property
    def units_per_block(self) -> int:
        if self.scheme == "deim":
            return self.N_hat
        if self.scheme == "doim":
            return self.M_hat
        if self.scheme == "randim":
            return 1
        return self.M_hat * self.N_hat

    @property
    def k_active(self) -> int:
        """Active blocks per subframe (n_act for RandomIM, all for plain)."""
        if self.scheme == "randim":
            return self.n_act
        if self.scheme == "plain":
            return 1
        return self.k_hat

    @property
    def constellation(self) -> np.ndarray:
        """Bit-word-indexed constellation of size mod_order."""
        return BPSK if self.mod_order == 2 else QPSK

    @property
    def bits_per_symbol(self) -> int:
        return self.mod_order.bit_length() - 1


@dataclass(frozen=True)
class BlockId:
    """Global block identity: subframe beta, within-subframe block b, global f.

    All three are 1-based; f = (beta-1)*blocks_per_subframe + b.
    """

    beta: int
    b: int
    f: int


def subframe_of(l: int, k: int, cfg: FrameConfig) -> int:
    """Subframe index beta = floor(l/M_hat) + M_bar*floor(k/N_hat) + 1."""
    if not (0 <= l < cfg.M and 0 <= k < cfg.N):
        raise ValueError(f"grid index ({l},{k}) out of range for {cfg.M}x{cfg.N}")
    return (l // cfg.M_hat) + cfg.M_bar * (k // cfg.N_hat) + 1


def subframe_origin(beta: int, cfg: FrameConfig) -> tuple[int, int]:
    """Top-left (delay, Doppler) coordinate of subframe beta."""
    if not 1 <= beta <= cfg.J:
        raise ValueError(f"subframe index {beta} out of range 1..{cfg.J}")
    l_bar = (beta - 1) % cfg.M_bar
    k_bar = (beta - 1) // cfg.M_bar
    return l_bar * cfg.M_hat, k_bar * cfg.N_hat


def n_blocks_total(cfg: FrameConfig) -> int:
    return cfg.blocks_per_subframe * cfg.J


def block_id(f: int, cfg: FrameConfig) -> BlockId:
    """Split a global block index into (beta, b)."""
    nb = cfg.blocks_per_subframe
    if not 1 <= f <= nb * cfg.J:
        raise ValueError(f"block index {f} out of range 1..{nb * cfg.J}")
    beta = (f - 1) // nb + 1
    b = (f - 1) % nb + 1
    return BlockId(beta=beta, b=b, f=f)


def global_block(beta: int, b: int, cfg: FrameConfig) -> int:
    nb = cfg.blocks_per_subframe
    if not (1 <= beta <= cfg.J and 1 <= b <= nb):
        raise ValueError(f"(beta={beta}, b={b}) out of range")
    return (beta - 1) * nb + b


def block_units(f: int, cfg: FrameConfig) -> np.ndarray:
    """Grid coordinates covered by global block f, in symbol scan order.

    Returns an array of shape (units_per_block, 2) of (delay, Doppler)
    pairs: a DeIM block is one delay column of its subframe (ascending
    Doppler), a DoIM block one Doppler row (ascending delay), a RandomIM
    block a single unit, and the plain pseudo-block the whole subframe.
    """
    bid = block_id(f, cfg)
    l0, k0 = subframe_origin(bid.beta, cfg)
    if cfg.scheme == "deim":
        l = l0 + (bid.b - 1)
        return np.array([(l, k0 + j) for j in range(cfg.N_hat)])
    if cfg.scheme == "doim":
        k = k0 + (bid.b - 1)
        return np.array([(l0 + i, k) for i in range(cfg.M_hat)])
    if cfg.scheme == "randim":
        # units enumerated delay-fastest, matching the vectorization order
        i = (bid.b - 1) % cfg.M_hat
        j = (bid.b - 1) // cfg.M_hat
        return np.array([(l0 + i, k0 + j)])
    return np.array(
        [(l0 + i, k0 + j) for j in range(cfg.N_hat) for i in range(cfg.M_hat)]
    )


def subframe_units(beta: int, cfg: FrameConfig) -> np.ndarray:
    """All (delay, Doppler) coordinates of subframe beta, delay-fastest."""
    l0, k0 = subframe_origin(beta, cfg)
    return np.array(
        [(l0 + i, k0 + j) for j in range(cfg.N_hat) for i in range(cfg.M_hat)]
    )


def vectorize(grid: np.ndarray) -> np.ndarray:
    """Flatten an M x N grid so that out[l + k*M] = X[l, k]."""
    return np.asarray(grid).ravel(order="F")


def devectorize(vec: np.ndarray, cfg: FrameConfig) -> np.ndarray:
    """Inverse of :func:`vectorize`."""
    vec = np.asarray(vec)
    if vec.size != cfg.M * cfg.N:
        raise ValueError(f"vector length {vec.size} != M*N = {cfg.M * cfg.N}")
    return vec.reshape((cfg.M, cfg.N), order="F")


def unit_index(l: int, k: int, M: int) -> int:
    """Vector index rho = l + k*M of grid coordinate (l, k)."""
    return l + k * M
