"""Monte Carlo BER engine: per-frame chain, stopping rule, CSV output.

Every frame draws payload, channel, and noise from an RNG stream keyed on
(seed, SNR point, frame index), so results are reproducible and
independent of worker scheduling; identical seeds across schemes,
detectors, or CSI-error levels give paired comparisons on the same
channel realizations.
"""

from __future__ import annotations

import csv
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .channel import (
    PulseShape,
    apply_time_domain,
    build_effective,
    gen_paths,
    perturb_csi,
    tap_count,
)
from .detect import DetectorConfig, detect_frame
from .frame import FrameConfig, vectorize
from .immap import index_bit_mask, map_bits, payload_bits
from .modem import add_cp, demodulate, modulate

CSV_COLUMNS = (
    "snr_db",
    "scheme",
    "detector",
    "frames",
    "bit_errors",
    "ber",
    "index_ber",
    "symbol_ber",
    "mean_iters",
    "seconds",
)

_WAVE = 512  # frames per stopping-rule check; fixed so worker count never changes results


@dataclass
class SimConfig:
    """Everything one experiment needs; seed fully determines all randomness."""

    frame: FrameConfig
    snr_db_list: tuple = (10.0,)
    velocity_kmph: float = 300.0
    n_paths: int = 4
    det_cfg: DetectorConfig = field(default_factory=DetectorConfig)
    csi_eps: float = 0.0
    prune_eps: float = 1e-4
    seed: int = 0
    min_frame_errors: int = 200
    max_frames: int = 1_000_000
    tau_max_samples: float = 8.0
    rolloff: float = 0.4
    span_taps: int = 10
    workers: int = 1
    ml_cap: int = 2**20
    out: str | None = None

    def __post_init__(self):
        if self.min_frame_errors < 1:
            raise ValueError("min_frame_errors must be >= 1")

    @property
    def pulse(self) -> PulseShape:
        return PulseShape(rolloff=self.rolloff, span_taps=self.span_taps)

    @property
    def tau_max(self) -> float:
        return self.tau_max_samples * self.frame.T_s


@dataclass
class BerRecord:
    """Accumulated error statistics for one (SNR, scheme, detector) point."""

    snr_db: float
    scheme: str
    detector: str
    frames: int
    bit_errors: int
    index_bit_errors: int
    symbol_bit_errors: int
    frame_errors: int
    payload_bits: int
    index_bits: int
    sum_iters: int
    wall_time: float

    @property
    def ber(self) -> float:
        return self.bit_errors / (self.frames * self.payload_bits)

    @property
    def index_ber(self) -> float:
        if self.index_bits == 0:
            return 0.0
        return self.index_bit_errors / (self.frames * self.index_bits)

    @property
    def symbol_ber(self) -> float:
        sym_bits = self.payload_bits - self.index_bits
        if sym_bits == 0:
            return 0.0
        return self.symbol_bit_errors / (self.frames * sym_bits)

    @property
    def mean_iters(self) -> float:
        return self.sum_iters / self.frames


def _point_key(snr_db: float) -> int:
    # millidB, offset to stay nonnegative for SeedSequence
    return int(round(snr_db * 1000.0)) + (1 << 21)


def _sim_frame(sim: SimConfig, snr_db: float, frame_idx: int):
    """One full TX -> channel -> RX -> detect pass; returns error counts."""
    cfg = sim.frame
    rng = np.random.default_rng(
        np.random.SeedSequence((sim.seed, _point_key(snr_db), frame_idx))
    )
    gamma = 10.0 ** (snr_db / 10.0)
    sigma2 = 1.0 / gamma

    bits = rng.integers(0, 2, size=payload_bits(cfg)).astype(np.uint8)
    X, _ = map_bits(bits, cfg)
    s = modulate(X, cfg)
    P = tap_count(sim.pulse, sim.tau_max, cfg.T_s)
    s_cp = add_cp(s, P - 1)
    paths = gen_paths(
        cfg, sim.n_paths, sim.velocity_kmph, rng, tau_max=sim.tau_max, pulse=sim.pulse
    )
    r = apply_time_domain(s_cp, paths, cfg, gamma=gamma, rng=rng)
    y = vectorize(demodulate(r, cfg))

    # receiver-side channel knowledge: perturbed when csi_eps > 0
    det_paths = perturb_csi(paths, sim.csi_eps, rng) if sim.csi_eps > 0 else paths
    prune = 0.0 if sim.det_cfg.kind == "ml" else sim.prune_eps
    eff = build_effective(det_paths, cfg, prune_eps=prune, sigma2=sigma2)
    bits_hat, iters = detect_frame(y, eff, sigma2, cfg, sim.det_cfg, ml_cap=sim.ml_cap)

    wrong = bits_hat != bits
    bit_err = int(wrong.sum())
    idx_err = int(wrong[index_bit_mask(cfg)].sum())
    return bit_err, idx_err, int(bit_err > 0), iters


def _run_range(sim: SimConfig, snr_db: float, lo: int, hi: int) -> np.ndarray:
    tot = np.zeros(4, dtype=np.int64)  # bit_err, idx_err, frame_err, iters
    for i in range(lo, hi):
        tot += _sim_frame(sim, snr_db, i)
    return tot


def run_point(sim: SimConfig, snr_db: float) -> BerRecord:
    """Simulate one SNR point until min_frame_errors or max_frames."""
    t0 = time.perf_counter()
    cfg = sim.frame
    acc = np.zeros(4, dtype=np.int64)
    frames = 0
    pool = ProcessPoolExecutor(sim.workers) if sim.workers > 1 else None
    try:
        while frames < sim.max_frames and acc[2] < sim.min_frame_errors:
            hi = min(frames + _WAVE, sim.max_frames)
            if pool is None:
                acc += _run_range(sim, snr_db, frames, hi)
            else:
                cuts = np.linspace(frames, hi, sim.workers + 1).astype(int)
                futs = [
                    pool.submit(_run_range, sim, snr_db, a, b)
                    for a, b in zip(cuts[:-1], cuts[1:])
                    if b > a
                ]
                for fu in futs:
                    acc += fu.result()
            frames = hi
    finally:
        if pool is not None:
            pool.shutdown()

    B = payload_bits(cfg)
    m1 = int(index_bit_mask(cfg).sum())
    return BerRecord(
        snr_db=snr_db,
        scheme=cfg.scheme,
        detector=sim.det_cfg.kind,
        frames=frames,
        bit_errors=int(acc[0]),
        index_bit_errors=int(acc[1]),
        symbol_bit_errors=int(acc[0] - acc[1]),
        frame_errors=int(acc[2]),
        payload_bits=B,
        index_bits=m1,
        sum_iters=int(acc[3]),
        wall_time=time.perf_counter() - t0,
    )


def run_sweep(sim: SimConfig) -> list[BerRecord]:
    """One record per SNR, ascending; writes CSV when sim.out is set."""
    records = [run_point(sim, s) for s in sorted(sim.snr_db_list)]
    if sim.out:
        write_csv(records, sim.out)
    return records


def compare(
    sim: SimConfig,
    schemes: tuple = ("deim", "doim"),
    detectors: tuple | None = None,
    bounds_by_scheme: dict | None = None,
) -> list[BerRecord]:
    """Run the sweep for every (scheme, detector) pair into one table.

    bounds_by_scheme optionally maps scheme -> per-SNR bound values (same
    order as the sorted SNR list) for the joined CSV column.
    """
    detectors = detectors or (sim.det_cfg.kind,)
    records = []
    for scheme in schemes:
        for det in detectors:
            variant = replace(
                sim,
                frame=replace(sim.frame, scheme=scheme),
                det_cfg=replace(sim.det_cfg, kind=det),
                out=None,
            )
            records.extend(run_sweep(variant))
    records.sort(key=lambda r: (r.snr_db, r.scheme, r.detector))
    if sim.out:
        write_csv(records, sim.out, bounds_by_scheme=bounds_by_scheme)
    return records


def _format_row(rec: BerRecord) -> list[str]:
    return [
        f"{rec.snr_db:g}",
        rec.scheme,
        rec.detector,
        str(rec.frames),
        str(rec.bit_errors),
        f"{rec.ber:.10g}",
        f"{rec.index_ber:.10g}",
        f"{rec.symbol_ber:.10g}",
        f"{rec.mean_iters:.6g}",
        f"{rec.wall_time:.3f}",
    ]


def write_csv(records, path_or_file, sep: str = ",", bounds_by_scheme: dict | None = None):
    """Write records in the fixed column order; sep='\\t' gives plot data.

    bounds_by_scheme maps scheme -> {snr_db: bound} for the optional
    joined bound column.
    """
    own = isinstance(path_or_file, str)
    fh = open(path_or_file, "w", newline="") if own else path_or_file
    try:
        writer = csv.writer(fh, delimiter=sep)
        header = list(CSV_COLUMNS)
        if bounds_by_scheme is not None:
            header.append("bound")
        writer.writerow(header)
        for rec in records:
            row = _format_row(rec)
            if bounds_by_scheme is not None:
                val = bounds_by_scheme.get(rec.scheme, {}).get(rec.snr_db)
                row.append("" if val is None else f"{val:.10g}")
            writer.writerow(row)
    finally:
        if own:
            fh.close()


def read_csv(path_or_file, sep: str = ",") -> list[dict]:
    """Read a results table back as typed dicts (inverse of write_csv)."""
    own = isinstance(path_or_file, str)
    fh = open(path_or_file, newline="") if own else path_or_file
    try:
        reader = csv.reader(fh, delimiter=sep)
        header = next(reader)
        rows = []
        for raw in reader:
            row = dict(zip(header, raw))
            for key in ("snr_db", "ber", "index_ber", "symbol_ber", "mean_iters", "seconds"):
                if key in row:
                    row[key] = float(row[key])
            for key in ("frames", "bit_errors"):
                if key in row:
                    row[key] = int(row[key])
            if "bound" in row and row["bound"]:
                row["bound"] = float(row["bound"])
            rows.append(row)
        return rows
    finally:
        if own:
            fh.close()
