"""Time-varying multipath channels and their delay-Doppler effective form.

Channels have L paths with complex gains, off-grid delays, and fractional
Doppler shifts. The composite pulse of the matched RRC filter pair is a
raised cosine sampled at fractional offsets, so delays need not land on
the sampling grid. The same path set can be applied physically in the
time domain or rendered as the exact sparse MN x MN delay-Doppler matrix
H; the two agree to numerical precision, which is the module's central
correctness contract.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from .frame import FrameConfig

SPEED_OF_LIGHT = 3e8


@dataclass(frozen=True)
class PulseShape:
    """Raised-cosine composite pulse / RRC receive filter parameters.

    span_taps is the one-sided truncation in samples; the pulse is zero
    beyond span_taps * T_s.
    """

    rolloff: float = 0.4
    span_taps: int = 10

    def __post_init__(self):
        if not 0 < self.rolloff <= 1:
            raise ValueError("rolloff must be in (0, 1]")
        if self.span_taps < 1:
            raise ValueError("span_taps must be >= 1")


@dataclass(frozen=True, eq=False)
class PathSet:
    """L-path channel: gains (complex), delays (s), Dopplers (Hz).

    tau_max is the configured maximum delay (not the realized maximum);
    it fixes the tap count so that matrix dimensions do not vary with the
    random draw.
    """

    gains: np.ndarray
    delays: np.ndarray
    dopplers: np.ndarray
    pulse: PulseShape
    tau_max: float

    @property
    def L(self) -> int:
        return len(self.gains)

    def tap_count(self, T_s: float) -> int:
        return tap_count(self.pulse, self.tau_max, T_s)


@dataclass(frozen=True)
class DopplerDecomposition:
    """nu * N * T split into integer tap k and fractional part beta."""

    k: int
    beta: float


@dataclass(eq=False)
class EffectiveChannel:
    """Sparse delay-Doppler input-output matrix with adjacency sets.

    row_nbrs[d] / col_nbrs[c] are the nonzero column/row indices of row d
    / column c (the detector neighbor sets, built on first access); Z is
    the max row/column degree.
    """

    H: sp.csr_matrix
    Z: int
    sigma2: float | None = None

    @property
    def row_nbrs(self) -> list:
        if not hasattr(self, "_row_nbrs"):
            self._row_nbrs = np.split(self.H.indices, self.H.indptr[1:-1])
        return self._row_nbrs

    @property
    def col_nbrs(self) -> list:
        if not hasattr(self, "_col_nbrs"):
            Hc = self.H.tocsc()
            self._col_nbrs = np.split(Hc.indices, Hc.indptr[1:-1])
        return self._col_nbrs


def sample_prc(pulse: PulseShape, t, T_s: float):
    """Raised-cosine composite pulse value(s) at time offset t (seconds).

    The removable singularity at |t| = T_s/(2*rolloff) is evaluated by
    its analytic limit; the pulse is truncated beyond span_taps samples.
    """
    x = np.asarray(t, dtype=float) / T_s
    a = pulse.rolloff
    denom = 1.0 - (2.0 * a * x) ** 2
    near_pole = np.abs(denom) < 1e-9
    safe = np.where(near_pole, 1.0, denom)
    val = np.sinc(x) * np.cos(np.pi * a * x) / safe
    val = np.where(near_pole, (np.pi / 4.0) * np.sinc(x), val)
    val = np.where(np.abs(x) > pulse.span_taps, 0.0, val)
    # flush rounding residue so Nyquist zero crossings at integer sample
    # offsets are exact and on-grid channels stay truly sparse
    val = np.where(np.abs(val) < 1e-13, 0.0, val)
    return val if val.ndim else float(val)


def rrc_taps(pulse: PulseShape, T_s: float) -> np.ndarray:
    """Unit-energy discrete RRC receive filter sampled at T_s."""
    return _rrc_taps_cached(pulse.rolloff, pulse.span_taps)


@lru_cache(maxsize=16)
def _rrc_taps_cached(rolloff: float, span_taps: int) -> np.ndarray:
    # samples sit at integer multiples of T_s, so the taps are T_s-free
    pulse = PulseShape(rolloff=rolloff, span_taps=span_taps)
    a = pulse.rolloff
    n = np.arange(-pulse.span_taps, pulse.span_taps + 1, dtype=float)
    g = np.empty_like(n)
    for i, x in enumerate(n):
        if x == 0.0:
            g[i] = 1.0 - a + 4.0 * a / np.pi
        elif abs(abs(x) - 1.0 / (4.0 * a)) < 1e-9:
            g[i] = (a / np.sqrt(2.0)) * (
                (1.0 + 2.0 / np.pi) * np.sin(np.pi / (4.0 * a))
                + (1.0 - 2.0 / np.pi) * np.cos(np.pi / (4.0 * a))
            )
        else:
            g[i] = (
                np.sin(np.pi * x * (1.0 - a)) + 4.0 * a * x * np.cos(np.pi * x * (1.0 + a))
            ) / (np.pi * x * (1.0 - (4.0 * a * x) ** 2))
    return g / np.sqrt(np.sum(g**2))


def tap_count(pulse: PulseShape, tau_max: float, T_s: float) -> int:
    """Channel tap count P covering the delay spread plus pulse span."""
    return int(np.ceil(tau_max / T_s - 1e-12)) + pulse.span_taps + 1


def doppler_split(nu: float, cfg: FrameConfig) -> DopplerDecomposition:
    """Split nu*N*T into integer Doppler tap and fractional part in (-0.5, 0.5]."""
    x = nu * cfg.N * cfg.T
    k = int(np.ceil(x - 0.5))
    return DopplerDecomposition(k=k, beta=x - k)


def gen_paths(
    cfg: FrameConfig,
    L: int,
    velocity_kmph: float,
    rng=None,
    tau_max: float | None = None,
    pulse: PulseShape = PulseShape(),
) -> PathSet:
    """Draw a random L-path channel.

    Doppler shifts are nu_max*cos(theta) with theta uniform on [-pi, pi]
    and nu_max from the velocity and carrier; the first delay is 0 and the
    rest are uniform on (0, tau_max] (off-grid values allowed); gains are
    i.i.d. CN(0, 1/L). Deterministic under a fixed seed.
    """
    if L < 1:
        raise ValueError("need at least one path")
    rng = np.random.default_rng(rng)
    if tau_max is None:
        tau_max = 8.0 * cfg.T_s
    nu_max = (velocity_kmph / 3.6) * cfg.carrier_hz / SPEED_OF_LIGHT
    theta = rng.uniform(-np.pi, np.pi, size=L)
    dopplers = nu_max * np.cos(theta)
    delays = np.zeros(L)
    if L > 1:
        # 1 - U gives the half-open interval (0, tau_max]
        delays[1:] = tau_max * (1.0 - rng.random(L - 1))
    gains = (rng.standard_normal(L) + 1j * rng.standard_normal(L)) / np.sqrt(2.0 * L)
    return PathSet(gains=gains, delays=delays, dopplers=dopplers, pulse=pulse, tau_max=tau_max)


def apply_time_domain(
    s_cp: np.ndarray,
    paths: PathSet,
    cfg: FrameConfig,
    gamma: float | None = None,
    rng=None,
) -> np.ndarray:
    """Pass a CP-extended time signal through the channel, remove the CP.

    Implements r[u] = sum_p h[u,p] s[(u-p) mod MN] + n[u] with
    h[u,p] = sum_i h_i exp(j2pi nu_i (u-p) T_s) P_rc(p T_s - tau_i); the
    Doppler phase is referenced to the first payload sample. When gamma
    (linear SNR) is given, AWGN of variance 1/gamma filtered by the
    unit-energy receive RRC is added; gamma=None means noiseless.
    """
    MN = cfg.M * cfg.N
    Ts = cfg.T_s
    P = paths.tap_count(Ts)
    L_cp = len(s_cp) - MN
    if L_cp < P - 1:
        raise ValueError(f"CP length {L_cp} shorter than channel span {P - 1}")

    u = np.arange(MN)
    p = np.arange(P)
    h = np.zeros((MN, P), dtype=complex)
    for g, tau, nu in zip(paths.gains, paths.delays, paths.dopplers):
        prc = sample_prc(paths.pulse, p * Ts - tau, Ts)
        h += g * np.outer(np.exp(2j * np.pi * nu * Ts * u), np.exp(-2j * np.pi * nu * Ts * p) * prc)

    r = np.zeros(MN, dtype=complex)
    for pp in range(P):
        r += h[:, pp] * s_cp[L_cp - pp : L_cp - pp + MN]

    if gamma is not None:
        rng = np.random.default_rng(rng)
        sigma_n = np.sqrt(1.0 / gamma)
        span = paths.pulse.span_taps
        white = (
            rng.standard_normal(MN + 2 * span) + 1j * rng.standard_normal(MN + 2 * span)
        ) * (sigma_n / np.sqrt(2.0))
        r += np.convolve(white, rrc_taps(paths.pulse, Ts), mode="valid")
    return r


def _theta(beta: float, N: int) -> np.ndarray:
    """Doppler spreading kernel theta(q, beta) for q = 0..N-1.

    Geometric sum over the N time slots; the 0/0 case at q + beta = 0 has
    the analytic limit N.
    """
    q = np.arange(N)
    num = np.exp(2j * np.pi * beta) - 1.0
    den = np.exp(2j * np.pi * (q + beta) / N) - 1.0
    small = np.abs(den) < 1e-12
    return np.where(small, float(N), num / np.where(small, 1.0, den))


def _accumulate_path(H4: np.ndarray, gain: complex, tau: float, nu: float, paths: PathSet, cfg: FrameConfig):
    """Add one path's contribution to H viewed as H4[k, l, k', l'].

    The per-tap coefficient factors into a delay part xi(l, p) and a
    Doppler coupling T0[k, k'] that only depends on the tap through the
    slot-wrap count w of the sample index l - p, so the accumulation is a
    handful of (delay matrix) x (Doppler matrix) outer products.
    """
    M, N = cfg.M, cfg.N
    Ts = cfg.T_s
    P = paths.tap_count(Ts)
    dec = doppler_split(nu, cfg)
    kv, bv = dec.k, dec.beta

    theta = _theta(bv, N)
    k_arr = np.arange(N)
    qmat = (k_arr[None, :] - k_arr[:, None] + kv) % N
    T0 = theta[qmat] / N
    col_phase = np.exp(-2j * np.pi * k_arr / N)

    p_arr = np.arange(P)
    prc = sample_prc(paths.pulse, p_arr * Ts - tau, Ts)
    nz = prc != 0.0
    if not nz.any():
        return
    p_nz = p_arr[nz]
    l_arr = np.arange(M)
    cvec = gain * prc[nz] * np.exp(-2j * np.pi * p_nz * (kv + bv) / (M * N))
    xi = np.exp(2j * np.pi * l_arr * (kv + bv) / (M * N))[:, None] * cvec[None, :]  # (M, P')
    lp = (l_arr[:, None] - p_nz[None, :]) % M
    wraps = (p_nz[None, :] // M) + (l_arr[:, None] < (p_nz[None, :] % M))
    l_mat = np.broadcast_to(l_arr[:, None], wraps.shape)

    for w in np.unique(wraps):
        mask = wraps == w
        G = np.zeros((M, M), dtype=complex)
        np.add.at(G, (l_mat[mask], lp[mask]), xi[mask])
        Tw = T0 * col_phase[None, :] ** w if w else T0
        H4 += np.multiply.outer(Tw, G).transpose(0, 2, 1, 3)


def effective_dense(paths: PathSet, cfg: FrameConfig) -> np.ndarray:
    """Exact (unpruned) dense MN x MN delay-Doppler matrix H."""
    M, N = cfg.M, cfg.N
    H4 = np.zeros((N, M, N, M), dtype=complex)
    for g, tau, nu in zip(paths.gains, paths.delays, paths.dopplers):
        _accumulate_path(H4, g, tau, nu, paths, cfg)
    return H4.reshape(M * N, M * N)


def per_path_effective(paths: PathSet, cfg: FrameConfig) -> list[np.ndarray]:
    """Unit-gain dense effective matrices, one per path."""
    M, N = cfg.M, cfg.N
    out = []
    for tau, nu in zip(paths.delays, paths.dopplers):
        H4 = np.zeros((N, M, N, M), dtype=complex)
        _accumulate_path(H4, 1.0, tau, nu, paths, cfg)
        out.append(H4.reshape(M * N, M * N))
    return out


def _prune_rows(H: np.ndarray, eps: float) -> np.ndarray:
    """Keep per row the largest-magnitude entries holding >= 1-eps of the
    row energy; zero the rest."""
    out = np.zeros_like(H)
    for d in range(H.shape[0]):
        row = H[d]
        mag2 = np.abs(row) ** 2
        total = mag2.sum()
        if total == 0.0:
            continue
        order = np.argsort(mag2)[::-1]
        kept = np.cumsum(mag2[order])
        n_keep = int(np.searchsorted(kept, (1.0 - eps) * total) + 1)
        keep_idx = order[:n_keep]
        out[d, keep_idx] = row[keep_idx]
    return out


def build_effective(
    paths: PathSet,
    cfg: FrameConfig,
    prune_eps: float = 1e-4,
    sigma2: float | None = None,
) -> EffectiveChannel:
    """Build the sparse effective channel with neighbor sets.

    prune_eps > 0 drops the smallest per-row entries while retaining at
    least 1 - prune_eps of each row's energy; prune_eps = 0 keeps every
    nonzero entry (exact).
    """
    Hd = effective_dense(paths, cfg)
    if prune_eps > 0:
        Hd = _prune_rows(Hd, prune_eps)
    Hd[np.abs(Hd) < 1e-300] = 0.0
    H = sp.csr_matrix(Hd)
    H.eliminate_zeros()
    row_deg = np.diff(H.indptr)
    col_deg = np.bincount(H.indices, minlength=H.shape[1])
    Z = int(max(row_deg.max(initial=0), col_deg.max(initial=0)))
    return EffectiveChannel(H=H, Z=Z, sigma2=sigma2)


def build_phi(X: np.ndarray, paths: PathSet, cfg: FrameConfig) -> np.ndarray:
    """L x MN signal matrix whose rows are the per-path (unit-gain)
    channel responses to grid X; gains @ build_phi(X) equals (H x)^T."""
    x = np.asarray(X).ravel(order="F")
    return np.stack([Hi @ x for Hi in per_path_effective(paths, cfg)])


def perturb_csi(paths: PathSet, eps: float, rng=None) -> PathSet:
    """Perturb every path parameter within a relative radius eps.

    Gains move uniformly in the complex disc of radius eps*|h|; delays and
    Dopplers uniformly in the interval of half-width eps*|x|. eps=0 is the
    identity.
    """
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    if eps == 0:
        return paths
    rng = np.random.default_rng(rng)
    L = paths.L
    radius = eps * np.abs(paths.gains) * np.sqrt(rng.random(L))
    angle = rng.uniform(0.0, 2.0 * np.pi, size=L)
    gains = paths.gains + radius * np.exp(1j * angle)
    delays = paths.delays + eps * np.abs(paths.delays) * rng.uniform(-1.0, 1.0, size=L)
    dopplers = paths.dopplers + eps * np.abs(paths.dopplers) * rng.uniform(-1.0, 1.0, size=L)
    return replace(paths, gains=gains, delays=delays, dopplers=dopplers)


def save_paths(paths: PathSet, file) -> None:
    """Dump paths as plain text, one path per line: re(h) im(h) tau nu."""
    own = isinstance(file, str)
    fh = open(file, "w") if own else file
    try:
        for g, tau, nu in zip(paths.gains, paths.delays, paths.dopplers):
            fh.write(f"{g.real:.17g} {g.imag:.17g} {tau:.17g} {nu:.17g}\n")
    finally:
        if own:
            fh.close()


def load_paths(file, pulse: PulseShape = PulseShape(), tau_max: float | None = None) -> PathSet:
    """Read a path dump written by :func:`save_paths`."""
    own = isinstance(file, str)
    fh = open(file) if own else file
    try:
        rows = [line.split() for line in fh if line.strip()]
    finally:
        if own:
            fh.close()
    vals = np.array([[float(v) for v in row] for row in rows])
    delays = vals[:, 2]
    if tau_max is None:
        tau_max = float(delays.max())
    return PathSet(
        gains=vals[:, 0] + 1j * vals[:, 1],
        delays=delays,
        dopplers=vals[:, 3],
        pulse=pulse,
        tau_max=tau_max,
    )
