"""Command-line front end: sweep, bound, and compare subcommands.

Flags mirror SimConfig fields; a key-value config file can preset any of
them (CLI flags override file values). SNR lists accept either comma
syntax ("8,10,12") or range syntax "start:step:stop" (inclusive).
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace

from .bounds import union_bound
from .detect import DetectorConfig
from .frame import FrameConfig
from .harness import SimConfig, compare, run_sweep, write_csv


def parse_snr_list(text: str) -> tuple:
    if ":" in text:
        start, step, stop = (float(v) for v in text.split(":"))
        if step <= 0:
            raise ValueError("SNR range step must be positive")
        n = int(round((stop - start) / step)) + 1
        return tuple(start + i * step for i in range(n) if start + i * step <= stop + 1e-9)
    return tuple(float(v) for v in text.split(","))


def parse_config_file(path: str) -> dict:
    """Read 'key value' / 'key = value' / 'key: value' lines; '#' comments."""
    out = {}
    with open(path) as fh:
        for raw in fh:
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            for sep in ("=", ":", None):
                if sep is None:
                    parts = line.split(None, 1)
                elif sep in line:
                    parts = line.split(sep, 1)
                else:
                    continue
                if len(parts) == 2:
                    out[parts[0].strip().replace("-", "_")] = parts[1].strip()
                    break
    return out


_MOD_ORDER = {"bpsk": 2, "qpsk": 4, "2": 2, "4": 4}


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="key-value config file; flags override it")
    p.add_argument("--scheme", choices=("deim", "doim", "randim", "plain"))
    p.add_argument("--detector", choices=("ml", "mljsapd", "cmpd"))
    p.add_argument("--snr-db", help="comma list or start:step:stop")
    p.add_argument("--m", type=int, help="delay bins M")
    p.add_argument("--n", type=int, help="Doppler bins N")
    p.add_argument("--mhat", type=int, help="delay bins per subframe")
    p.add_argument("--nhat", type=int, help="Doppler bins per subframe")
    p.add_argument("--khat", type=int, help="active blocks per subframe")
    p.add_argument("--n-act", type=int, help="RandomIM active units per subframe")
    p.add_argument("--mod", choices=("bpsk", "qpsk"))
    p.add_argument("--delta-f", type=float, help="subcarrier spacing in Hz")
    p.add_argument("--carrier-hz", type=float)
    p.add_argument("--velocity-kmph", type=float)
    p.add_argument("--paths", type=int, help="number of channel paths L")
    p.add_argument("--csi-eps", type=float, help="relative CSI error radius")
    p.add_argument("--prune-eps", type=float, help="per-row energy pruning tolerance")
    p.add_argument("--tau-max", type=float, help="max delay in samples (T_s units)")
    p.add_argument("--seed", type=int)
    p.add_argument("--min-frame-errors", type=int)
    p.add_argument("--max-frames", type=int)
    p.add_argument("--damping", type=float)
    p.add_argument("--rho", type=float, help="convergence slack")
    p.add_argument("--iters", type=int, help="max message-passing iterations")
    p.add_argument("--workers", type=int)
    p.add_argument("--out", help="output CSV path (default stdout)")
    p.add_argument(
        "--plot-data", action="store_true", help="tab-separated output for plotting tools"
    )


_DEFAULTS = {
    "scheme": "deim",
    "detector": "mljsapd",
    "snr_db": "0:2:16",
    "m": 64,
    "n": 16,
    "mhat": 4,
    "nhat": 4,
    "khat": 1,
    "n_act": 2,
    "mod": "qpsk",
    "delta_f": 15e3,
    "carrier_hz": 4e9,
    "velocity_kmph": 300.0,
    "paths": 4,
    "csi_eps": 0.0,
    "prune_eps": 1e-4,
    "tau_max": 8.0,
    "seed": 0,
    "min_frame_errors": 200,
    "max_frames": 1_000_000,
    "damping": 0.4,
    "rho": 0.1,
    "iters": 10,
    "workers": 1,
    "out": None,
}

_CASTS = {
    "m": int, "n": int, "mhat": int, "nhat": int, "khat": int, "n_act": int,
    "paths": int, "seed": int, "min_frame_errors": int, "max_frames": int,
    "iters": int, "workers": int,
    "delta_f": float, "carrier_hz": float, "velocity_kmph": float,
    "csi_eps": float, "prune_eps": float, "tau_max": float,
    "damping": float, "rho": float,
}


def _resolve(args: argparse.Namespace) -> dict:
    """Merge defaults < config file < explicit CLI flags."""
    merged = dict(_DEFAULTS)
    if args.config:
        for key, val in parse_config_file(args.config).items():
            merged[key] = _CASTS[key](val) if key in _CASTS else val
    for key in merged:
        val = getattr(args, key, None)
        if val is not None:
            merged[key] = val
    return merged


def _sim_from(opts: dict) -> SimConfig:
    cfg = FrameConfig(
        M=opts["m"],
        N=opts["n"],
        delta_f=opts["delta_f"],
        M_hat=opts["mhat"],
        N_hat=opts["nhat"],
        k_hat=opts["khat"],
        scheme=opts["scheme"],
        mod_order=_MOD_ORDER.get(opts["mod"], opts["mod"]),
        carrier_hz=opts["carrier_hz"],
        n_act=opts["n_act"],
    )
    det = DetectorConfig(
        kind=opts["detector"],
        damping=opts["damping"],
        rho=opts["rho"],
        max_iters=opts["iters"],
    )
    return SimConfig(
        frame=cfg,
        snr_db_list=parse_snr_list(str(opts["snr_db"])),
        velocity_kmph=opts["velocity_kmph"],
        n_paths=opts["paths"],
        det_cfg=det,
        csi_eps=opts["csi_eps"],
        prune_eps=opts["prune_eps"],
        seed=opts["seed"],
        min_frame_errors=opts["min_frame_errors"],
        max_frames=opts["max_frames"],
        tau_max_samples=opts["tau_max"],
        workers=opts["workers"],
        out=None,
    )


def _emit(records, opts, bounds_by_scheme=None):
    sep = "\t" if opts.get("plot_data") else ","
    if opts["out"]:
        write_csv(records, opts["out"], sep=sep, bounds_by_scheme=bounds_by_scheme)
        print(f"wrote {len(records)} records to {opts['out']}")
    else:
        write_csv(records, sys.stdout, sep=sep, bounds_by_scheme=bounds_by_scheme)


def cmd_sweep(args):
    opts = _resolve(args)
    sim = _sim_from(opts)
    _emit(run_sweep(sim), opts)


def cmd_bound(args):
    opts = _resolve(args)
    sim = _sim_from(opts)
    vals = union_bound(
        sim.frame,
        sim.n_paths,
        sorted(sim.snr_db_list),
        velocity_kmph=sim.velocity_kmph,
        tau_max=sim.tau_max,
        pulse=sim.pulse,
        n_geometry=args.geometry_draws,
        seed=sim.seed,
    )
    sep = "\t" if opts.get("plot_data") else ","
    lines = ["snr_db" + sep + "bound"]
    lines += [f"{s:g}{sep}{b:.10g}" for s, b in zip(sorted(sim.snr_db_list), vals)]
    text = "\n".join(lines) + "\n"
    if opts["out"]:
        with open(opts["out"], "w") as fh:
            fh.write(text)
        print(f"wrote bound table to {opts['out']}")
    else:
        sys.stdout.write(text)


def cmd_compare(args):
    opts = _resolve(args)
    sim = _sim_from(opts)
    schemes = tuple(args.schemes.split(","))
    detectors = tuple(args.detectors.split(",")) if args.detectors else (opts["detector"],)
    bounds_by_scheme = None
    if args.with_bound:
        snrs = sorted(sim.snr_db_list)
        bounds_by_scheme = {}
        for scheme in schemes:
            fcfg = replace(sim.frame, scheme=scheme)
            vals = union_bound(
                fcfg,
                sim.n_paths,
                snrs,
                velocity_kmph=sim.velocity_kmph,
                tau_max=sim.tau_max,
                pulse=sim.pulse,
                n_geometry=args.geometry_draws,
                seed=sim.seed,
            )
            bounds_by_scheme[scheme] = dict(zip(snrs, vals))
    records = compare(sim, schemes=schemes, detectors=detectors)
    _emit(records, opts, bounds_by_scheme=bounds_by_scheme)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="otfsim", description="OTFS-IM link-level Monte Carlo simulator"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_sweep = sub.add_parser("sweep", help="BER sweep for one scheme/detector")
    _add_common(p_sweep)
    p_sweep.set_defaults(func=cmd_sweep)

    p_bound = sub.add_parser("bound", help="analytical BER union bound")
    _add_common(p_bound)
    p_bound.add_argument("--geometry-draws", type=int, default=50)
    p_bound.set_defaults(func=cmd_bound)

    p_cmp = sub.add_parser("compare", help="combined table over schemes/detectors")
    _add_common(p_cmp)
    p_cmp.add_argument("--schemes", default="deim,doim")
    p_cmp.add_argument("--detectors", default=None)
    p_cmp.add_argument("--with-bound", action="store_true")
    p_cmp.add_argument("--geometry-draws", type=int, default=50)
    p_cmp.set_defaults(func=cmd_compare)

    args = parser.parse_args(argv)
    args.func(args)
    return 0


if __name__ == "__main__":
    sys.exit(main())
