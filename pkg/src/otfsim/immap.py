"""Bit <-> delay-Doppler grid mapping for the block-wise IM schemes.

Per subframe the first p1 payload bits select the active blocks through a
look-up table (lexicographic combinations, truncated to a power of two),
and the remaining p2 bits are mapped onto constellation symbols placed on
the active units in a fixed scan order. Inactive units are exactly zero.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .frame import FrameConfig, block_units, global_block


@dataclass(frozen=True)
class LookupTable:
    """Index-bit words to k-combinations of block indices (1-based).

    combos[rank] is the sorted block tuple selected by the p1-bit word
    whose big-endian value equals rank.
    """

    combos: tuple[tuple[int, ...], ...]
    p1: int

    def rank_of(self, blocks: tuple[int, ...]) -> int | None:
        try:
            return self.combos.index(tuple(sorted(blocks)))
        except ValueError:
            return None


def build_lookup(n_blocks: int, k_hat: int) -> LookupTable:
    """Enumerate combinations lexicographically and keep the first 2**p1."""
    if not 1 <= k_hat <= n_blocks:
        raise ValueError(f"need 1 <= k_hat <= n_blocks, got ({n_blocks}, {k_hat})")
    n_comb = math.comb(n_blocks, k_hat)
    p1 = int(math.floor(math.log2(n_comb)))
    combos = tuple(
        itertools.islice(itertools.combinations(range(1, n_blocks + 1), k_hat), 2**p1)
    )
    return LookupTable(combos=combos, p1=p1)


def lookup_for(cfg: FrameConfig) -> LookupTable:
    """The per-subframe look-up table implied by a frame config."""
    if cfg.scheme == "plain":
        return LookupTable(combos=((1,),), p1=0)
    return build_lookup(cfg.blocks_per_subframe, cfg.k_active)


@dataclass(frozen=True)
class ActivationPattern:
    """Active block indices per subframe; blocks[beta-1] is a sorted tuple."""

    blocks: tuple[tuple[int, ...], ...]

    def active_units(self, cfg: FrameConfig) -> np.ndarray:
        """(delay, Doppler) pairs of all active units in the symbol scan
        order (ascending global block index, block-internal order)."""
        coords = []
        for beta, blk in enumerate(self.blocks, start=1):
            for b in blk:
                coords.extend(block_units(global_block(beta, b, cfg), cfg))
        return np.array(coords)

    def mask(self, cfg: FrameConfig) -> np.ndarray:
        out = np.zeros((cfg.M, cfg.N), dtype=bool)
        units = self.active_units(cfg)
        out[units[:, 0], units[:, 1]] = True
        return out


def index_bits_per_subframe(cfg: FrameConfig) -> int:
    return lookup_for(cfg).p1


def symbol_bits_per_subframe(cfg: FrameConfig) -> int:
    if cfg.scheme == "plain":
        return cfg.M_hat * cfg.N_hat * cfg.bits_per_symbol
    return cfg.k_active * cfg.units_per_block * cfg.bits_per_symbol


def payload_bits(cfg: FrameConfig) -> int:
    """Total information bits per frame."""
    return (index_bits_per_subframe(cfg) + symbol_bits_per_subframe(cfg)) * cfg.J


def spectral_efficiency(cfg: FrameConfig) -> float:
    """Information bits per delay-Doppler resource unit (bps/Hz)."""
    per_subframe = index_bits_per_subframe(cfg) + symbol_bits_per_subframe(cfg)
    return per_subframe / (cfg.M_hat * cfg.N_hat)


def _bits_to_int(bits: np.ndarray) -> int:
    out = 0
    for b in bits:
        out = (out << 1) | int(b)
    return out


def _int_to_bits(value: int, width: int) -> np.ndarray:
    return np.array([(value >> (width - 1 - i)) & 1 for i in range(width)], dtype=np.uint8)


def map_bits(bits: np.ndarray, cfg: FrameConfig) -> tuple[np.ndarray, ActivationPattern]:
    """Map a payload bit vector onto a delay-Doppler grid.

    Returns the complex M x N grid (inactive units exactly 0) and the
    activation pattern chosen by the index bits.
    """
    bits = np.asarray(bits).astype(np.uint8).ravel()
    total = payload_bits(cfg)
    if bits.size != total:
        raise ValueError(f"payload length {bits.size} != required {total}")

    lut = lookup_for(cfg)
    p1 = lut.p1
    bps = cfg.bits_per_symbol
    const = cfg.constellation

    X = np.zeros((cfg.M, cfg.N), dtype=complex)
    chosen = []
    pos = 0
    for beta in range(1, cfg.J + 1):
        if cfg.scheme == "plain":
            blk = (1,)
        else:
            rank = _bits_to_int(bits[pos : pos + p1])
            blk = lut.combos[rank]
        pos += p1
        chosen.append(blk)
        for b in blk:
            units = block_units(global_block(beta, b, cfg), cfg)
            for l, k in units:
                word = _bits_to_int(bits[pos : pos + bps])
                X[l, k] = const[word]
                pos += bps
    return X, ActivationPattern(blocks=tuple(chosen))


def nearest_pattern(blocks: tuple[int, ...], lut: LookupTable) -> int:
    """Rank of the table entry closest to a detected block set.

    Detected patterns can fall outside the table when combinations were
    abandoned; resolution rule: maximum block-set overlap, ties broken by
    lowest rank.
    """
    rank = lut.rank_of(blocks)
    if rank is not None:
        return rank
    detected = set(blocks)
    overlaps = [len(detected & set(c)) for c in lut.combos]
    return int(np.argmax(overlaps))


def _demap_symbol(value: complex, const: np.ndarray) -> int:
    return int(np.argmin(np.abs(const - value)))


def demap(X_hat: np.ndarray, pattern: ActivationPattern, cfg: FrameConfig) -> np.ndarray:
    """Invert :func:`map_bits` from detected symbols and activation pattern.

    X_hat holds the detected symbol values on the pattern's active units
    (other entries are ignored). Off-table patterns are resolved via
    :func:`nearest_pattern`; index bits always come from an in-table rank.
    """
    lut = lookup_for(cfg)
    p1 = lut.p1
    bps = cfg.bits_per_symbol
    const = cfg.constellation

    out = np.empty(payload_bits(cfg), dtype=np.uint8)
    pos = 0
    for beta in range(1, cfg.J + 1):
        blk = pattern.blocks[beta - 1]
        if cfg.scheme == "plain":
            rank_blocks = (1,)
        else:
            rank = nearest_pattern(tuple(blk), lut)
            out[pos : pos + p1] = _int_to_bits(rank, p1)
            rank_blocks = blk
        pos += p1
        for b in rank_blocks:
            units = block_units(global_block(beta, b, cfg), cfg)
            for l, k in units:
                word = _demap_symbol(X_hat[l, k], const)
                out[pos : pos + bps] = _int_to_bits(word, bps)
                pos += bps
    return out


def enumerate_codewords(cfg: FrameConfig):
    """All 2**payload_bits codewords of a frame config.

    Returns (bits, X, patterns): the (K, B) payload matrix in ascending
    word order, the (MN, K) matrix of vectorized grids, and the per-word
    activation patterns. Intended for small frames (exhaustive ML and the
    union bound); callers enforce their own caps.
    """
    B = payload_bits(cfg)
    K = 2**B
    bits = ((np.arange(K)[:, None] >> np.arange(B - 1, -1, -1)[None, :]) & 1).astype(np.uint8)
    X = np.empty((cfg.M * cfg.N, K), dtype=complex)
    patterns = []
    for i in range(K):
        Xi, pat = map_bits(bits[i], cfg)
        X[:, i] = Xi.ravel(order="F")
        patterns.append(pat)
    return bits, X, patterns


def index_bit_mask(cfg: FrameConfig) -> np.ndarray:
    """Boolean mask over the payload marking index (vs constellation) bits."""
    p1 = index_bits_per_subframe(cfg)
    p2 = symbol_bits_per_subframe(cfg)
    per = np.concatenate([np.ones(p1, dtype=bool), np.zeros(p2, dtype=bool)])
    return np.tile(per, cfg.J)
