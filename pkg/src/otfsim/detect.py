"""ML and message-passing detection for OTFS-IM frames.

Three detectors share the vectorized model y = H x + z over the alphabet
S u {0} (S for plain OTFS): exhaustive ML for small frames, the
multi-layer joint symbol and activation pattern detector (four node
types: observation, variable, activity indicator, constraint), and the
customized two-node-type message passing detector that ranks blocks by
averaged LLRs.

Messages are computed in log space with per-edge normalization, a
variance floor, and uniform fallback for all-zero messages; likelihood
exponentials underflow otherwise at high SNR.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .channel import EffectiveChannel
from .frame import FrameConfig, block_units, global_block, unit_index
from .immap import ActivationPattern, demap, enumerate_codewords

_VAR_FLOOR = 1e-12
_LOG_TINY = 1e-300


class MLInfeasibleError(RuntimeError):
    """Raised when the exhaustive candidate count exceeds the cap."""


@dataclass(frozen=True)
class DetectorConfig:
    """Message-passing controls: damping, convergence slack, iteration cap."""

    kind: str = "mljsapd"  # ml | mljsapd | cmpd
    damping: float = 0.4
    rho: float = 0.1
    max_iters: int = 10

    def __post_init__(self):
        if not 0 < self.damping <= 1:
            raise ValueError("damping must be in (0, 1]")
        if self.kind not in ("ml", "mljsapd", "cmpd"):
            raise ValueError(f"unknown detector kind {self.kind!r}")


@dataclass
class Diagnostics:
    """Per-run detector diagnostics for the harness to persist."""

    iterations: int
    eta_trace: list
    converged: bool
    best_eta: float
    best_updates: list
    block_scores: np.ndarray | None
    pattern: ActivationPattern
    complexity: dict


@dataclass(eq=False)
class FactorGraph:
    """Neighbor structure of the detection graph for one frame.

    Edges follow the nonzeros of H in CSR order; csc_perm re-sorts them by
    variable (column). D(f)/K(beta) index blocks and subframes 0-based.
    """

    cfg: FrameConfig
    n_obs: int
    edge_row: np.ndarray
    edge_col: np.ndarray
    edge_val: np.ndarray
    row_ptr: np.ndarray
    csc_perm: np.ndarray
    inv_csc: np.ndarray
    col_ptr: np.ndarray
    block_units_vec: list
    subframe_blocks: list
    unit_block: np.ndarray
    Z: int


def build_graph(eff: EffectiveChannel, cfg: FrameConfig) -> FactorGraph:
    H = eff.H.tocsr()
    MN = cfg.M * cfg.N
    counts = np.diff(H.indptr)
    edge_row = np.repeat(np.arange(MN), counts)
    edge_col = H.indices.astype(np.int64)
    csc_perm = np.lexsort((edge_row, edge_col))
    inv_csc = np.empty_like(csc_perm)
    inv_csc[csc_perm] = np.arange(len(csc_perm))
    col_counts = np.bincount(edge_col, minlength=MN)
    col_ptr = np.concatenate([[0], np.cumsum(col_counts)])

    F = cfg.blocks_per_subframe * cfg.J
    block_units_vec = []
    unit_block = np.full(MN, -1, dtype=np.int64)
    for f in range(1, F + 1):
        units = block_units(f, cfg)
        c = units[:, 0] + units[:, 1] * cfg.M
        block_units_vec.append(c)
        unit_block[c] = f - 1
    nb = cfg.blocks_per_subframe
    subframe_blocks = [np.arange(beta * nb, (beta + 1) * nb) for beta in range(cfg.J)]

    return FactorGraph(
        cfg=cfg,
        n_obs=MN,
        edge_row=edge_row,
        edge_col=edge_col,
        edge_val=H.data.copy(),
        row_ptr=H.indptr.astype(np.int64),
        csc_perm=csc_perm,
        inv_csc=inv_csc,
        col_ptr=col_ptr,
        block_units_vec=block_units_vec,
        subframe_blocks=subframe_blocks,
        unit_block=unit_block,
        Z=eff.Z,
    )


def _segment_sum(values: np.ndarray, ptr: np.ndarray) -> np.ndarray:
    """Sum `values` over segments [ptr[i], ptr[i+1]); empty segments -> 0."""
    n = len(ptr) - 1
    out = np.zeros((n,) + values.shape[1:], dtype=values.dtype)
    nonempty = np.flatnonzero(np.diff(ptr) > 0)
    if nonempty.size:
        out[nonempty] = np.add.reduceat(values, ptr[nonempty], axis=0)
    return out


def _normalize_log(logp: np.ndarray) -> np.ndarray:
    """Row-normalize in log domain; rows with no finite mass become uniform."""
    mx = np.max(logp, axis=-1, keepdims=True)
    finite = np.isfinite(mx)
    p = np.exp(logp - np.where(finite, mx, 0.0))
    p = np.where(finite, p, 1.0)
    return p / p.sum(axis=-1, keepdims=True)


def _normalize(p: np.ndarray) -> np.ndarray:
    """Row-normalize probabilities; all-zero rows become uniform."""
    s = p.sum(axis=-1, keepdims=True)
    bad = (s <= 0.0) | ~np.isfinite(s)
    p = np.where(bad, 1.0, p)
    return p / p.sum(axis=-1, keepdims=True)


@dataclass(eq=False)
class MessageState:
    """All factor-graph messages and posteriors for one detector run."""

    p_edge: np.ndarray  # var -> obs pmfs, CSR edge order, (E, A)
    v_log: np.ndarray  # obs -> var log likelihoods, CSR order, (E, A)
    v_log_csc: np.ndarray
    q: np.ndarray  # (MN, 2) inactive/active beliefs
    w: np.ndarray  # (F, 2)
    psi: np.ndarray  # (F, 2)
    u: np.ndarray  # (MN, 2)
    posteriors: np.ndarray  # (MN, A)
    mu_edge: np.ndarray | None = None  # interference means, per edge
    var_edge: np.ndarray | None = None  # interference variances, per edge
    eta: float = 0.0
    p_bar: np.ndarray | None = None
    eta_best: float = -1.0  # sentinel: first iteration always stores p_bar


class MessagePassingDetector:
    """Shared engine for the MLJSAPD and CMPD schedules (synchronous sweeps)."""

    def __init__(
        self,
        y: np.ndarray,
        eff: EffectiveChannel,
        sigma2: float,
        cfg: FrameConfig,
        det_cfg: DetectorConfig,
    ):
        self.y = np.asarray(y)
        self.cfg = cfg
        self.det = det_cfg
        self.sigma2 = float(sigma2)
        self.graph = build_graph(eff, cfg)
        if cfg.has_im:
            self.alph = np.concatenate([[0.0 + 0.0j], cfg.constellation])
            self.active = np.concatenate([[False], np.ones(cfg.mod_order, bool)])
        else:
            self.alph = cfg.constellation.copy()
            self.active = np.ones(cfg.mod_order, bool)
        # the indicator/constraint layers exist only for IM schemes
        self.use_layers = det_cfg.kind == "mljsapd" and cfg.has_im

        g = self.graph
        E, A = len(g.edge_row), len(self.alph)
        MN, Fn = g.n_obs, len(g.block_units_vec)
        self.state = MessageState(
            p_edge=np.full((E, A), 1.0 / A),
            v_log=np.zeros((E, A)),
            v_log_csc=np.zeros((E, A)),
            q=np.full((MN, 2), 0.5),
            w=np.full((Fn, 2), 0.5),
            psi=np.full((Fn, 2), 0.5),
            u=np.full((MN, 2), 0.5),
            posteriors=np.full((MN, A), 1.0 / A),
        )
        self._colsum_v = np.zeros((MN, A))

    # --- message updates, one full sweep each ---

    def obs_to_var(self):
        """Gaussian-approximate interference cancellation at observations."""
        g, st = self.graph, self.state
        mom1 = st.p_edge @ self.alph
        mom2 = st.p_edge @ (np.abs(self.alph) ** 2)
        t1 = g.edge_val * mom1
        t2 = mom2 * np.abs(g.edge_val) ** 2 - np.abs(t1) ** 2
        S1 = _segment_sum(t1, g.row_ptr)
        S2 = _segment_sum(t2, g.row_ptr)
        mu = S1[g.edge_row] - t1
        var = np.maximum(S2[g.edge_row].real - t2.real + self.sigma2, _VAR_FLOOR)
        st.mu_edge = mu
        st.var_edge = var
        resid = self.y[g.edge_row][:, None] - mu[:, None] - np.outer(g.edge_val, self.alph)
        logv = -(np.abs(resid) ** 2) / var[:, None]
        logv -= logv.max(axis=1, keepdims=True)
        logv -= np.log(np.exp(logv).sum(axis=1, keepdims=True))
        st.v_log = logv
        st.v_log_csc = logv[g.csc_perm]
        self._colsum_v = _segment_sum(st.v_log_csc, g.col_ptr)

    def _damp(self, new: np.ndarray, old: np.ndarray) -> np.ndarray:
        return self.det.damping * new + (1.0 - self.det.damping) * old

    def var_to_ind(self):
        """Two-point activity beliefs q_c, damped."""
        g, st = self.graph, self.state
        cs = self._colsum_v
        act = cs[:, self.active]
        mx = act.max(axis=1, keepdims=True)
        log_q1 = mx[:, 0] + np.log(np.exp(act - mx).sum(axis=1))
        log_q0 = cs[:, 0]  # alphabet index 0 is the zero symbol
        q_tilde = _normalize_log(np.stack([log_q0, log_q1], axis=1))
        st.q = _normalize(self._damp(q_tilde, st.q))

    def ind_to_constraint(self):
        """Block activity beliefs w_f as products of unit beliefs."""
        g, st = self.graph, self.state
        logq = np.log(np.maximum(st.q, _LOG_TINY))
        w_log = np.zeros((len(g.block_units_vec), 2))
        np.add.at(w_log, g.unit_block, logq)
        st.w = _normalize_log(w_log)

    def constraint_to_ind(self):
        """Leave-one-out convolution enforcing k_hat active blocks."""
        g, st = self.graph, self.state
        k_act = self.cfg.k_active
        psi = np.empty_like(st.psi)
        for blocks in g.subframe_blocks:
            for f in blocks:
                omega = np.ones(1)
                for e in blocks:
                    if e != f:
                        omega = np.convolve(omega, st.w[e])
                p1 = omega[k_act - 1] if k_act - 1 < len(omega) else 0.0
                p0 = omega[k_act] if k_act < len(omega) else 0.0
                psi[f] = (p0, p1)
        st.psi = _normalize(psi)

    def ind_to_var(self):
        """Activity belief fed back to each unit from its block's peers."""
        g, st = self.graph, self.state
        n_f = len(g.block_units_vec)
        sum_q = np.zeros((n_f, 2))
        np.add.at(sum_q, g.unit_block, st.q)
        f_of_c = g.unit_block
        peers1 = sum_q[f_of_c, 1] - st.q[:, 1]
        peers0 = sum_q[f_of_c, 0] - st.q[:, 0]
        raw = np.stack([st.psi[f_of_c, 0] * peers0, st.psi[f_of_c, 1] * peers1], axis=1)
        st.u = _normalize(raw)

    def var_to_obs(self):
        """Extrinsic symbol pmfs back to observations, damped."""
        g, st = self.graph, self.state
        ext = self._colsum_v[g.edge_col[g.csc_perm]] - st.v_log_csc
        if self.use_layers:
            u_log = np.where(
                self.active[None, :],
                np.log(np.maximum(st.u[:, 1], _LOG_TINY))[:, None],
                np.log(np.maximum(st.u[:, 0], _LOG_TINY))[:, None],
            )
            ext = ext + u_log[g.edge_col[g.csc_perm]]
        p_tilde = _normalize_log(ext)[g.inv_csc]
        st.p_edge = _normalize(self._damp(p_tilde, st.p_edge))

    def convergence_and_posteriors(self) -> float:
        """Posterior pmfs and the fraction of confidently decided units."""
        g, st = self.graph, self.state
        post_log = self._colsum_v.copy()
        if self.use_layers:
            post_log += np.where(
                self.active[None, :],
                np.log(np.maximum(st.u[:, 1], _LOG_TINY))[:, None],
                np.log(np.maximum(st.u[:, 0], _LOG_TINY))[:, None],
            )
        st.posteriors = _normalize_log(post_log)
        st.eta = float(np.mean(st.posteriors.max(axis=1) >= 1.0 - self.det.rho))
        return st.eta

    def run(self) -> tuple[MessageState, Diagnostics]:
        st = self.state
        eta_trace = []
        best_updates = []
        converged = False
        it = 0
        for it in range(1, self.det.max_iters + 1):
            self.obs_to_var()
            if self.use_layers:
                self.var_to_ind()
                self.ind_to_constraint()
                self.constraint_to_ind()
                self.ind_to_var()
            self.var_to_obs()
            eta = self.convergence_and_posteriors()
            eta_trace.append(eta)
            if eta > st.eta_best:
                st.eta_best = eta
                st.p_bar = st.posteriors.copy()
                best_updates.append(it)
            if eta == 1.0:
                converged = True
                break
        diag = Diagnostics(
            iterations=it,
            eta_trace=eta_trace,
            converged=converged,
            best_eta=st.eta_best,
            best_updates=best_updates,
            block_scores=None,
            pattern=None,
            complexity=complexity_per_iteration(self.cfg, self.graph.Z, self.det.kind),
        )
        return st, diag


def select_active_and_decide(
    block_scores: np.ndarray, p_bar: np.ndarray, cfg: FrameConfig
) -> tuple[ActivationPattern, np.ndarray, np.ndarray]:
    """Pick the top-k blocks per subframe and hard-decide their symbols.

    Ties in block score go to the lowest block index. Returns the
    activation pattern, the detected grid, and the decoded payload bits.
    """
    nb = cfg.blocks_per_subframe
    if cfg.has_im:
        chosen = []
        for beta in range(cfg.J):
            scores = block_scores[beta * nb : (beta + 1) * nb]
            order = np.lexsort((np.arange(nb), -scores))
            chosen.append(tuple(sorted(int(b) + 1 for b in order[: cfg.k_active])))
        pattern = ActivationPattern(blocks=tuple(chosen))
    else:
        pattern = ActivationPattern(blocks=((1,),) * cfg.J)

    const = cfg.constellation
    offset = 1 if cfg.has_im else 0  # skip the zero-symbol slot for IM
    sym_idx = np.argmax(p_bar[:, offset:], axis=1)
    X_hat = np.zeros((cfg.M, cfg.N), dtype=complex)
    for beta, blk in enumerate(pattern.blocks, start=1):
        for b in blk:
            for l, k in block_units(global_block(beta, b, cfg), cfg):
                X_hat[l, k] = const[sym_idx[unit_index(l, k, cfg.M)]]
    return pattern, X_hat, demap(X_hat, pattern, cfg)


def unit_llr(posteriors: np.ndarray, form: str = "sum") -> np.ndarray:
    """Per-unit activity LLR from posterior pmfs over {0} u S.

    form="sum" uses log(sum_{x in S} p(x) / p(0)), the activity posterior
    odds. form="product" is log(prod_{x in S} p(x) / p(0)); it decreases
    as the symbol posterior sharpens (the product multiplies the vanishing
    wrong-symbol masses), which inverts the active/inactive ranking at
    high SNR, so the detector ranks with the sum form.
    """
    p = np.maximum(np.asarray(posteriors), _LOG_TINY)
    if form == "product":
        return np.log(p[:, 1:]).sum(axis=1) - np.log(p[:, 0])
    return np.log(p[:, 1:].sum(axis=1)) - np.log(p[:, 0])


def _block_llr_scores(posteriors: np.ndarray, graph: FactorGraph) -> np.ndarray:
    """Per-block mean of the unit activity LLRs."""
    llr = unit_llr(posteriors)
    return np.array([llr[c].mean() for c in graph.block_units_vec])


def mljsapd_detect(
    y: np.ndarray,
    eff: EffectiveChannel,
    sigma2: float,
    cfg: FrameConfig,
    det_cfg: DetectorConfig = DetectorConfig(kind="mljsapd"),
) -> tuple[np.ndarray, Diagnostics]:
    """Multi-layer joint symbol and activation pattern detection."""
    engine = MessagePassingDetector(y, eff, sigma2, cfg, det_cfg)
    st, diag = engine.run()
    scores = st.w[:, 1] if cfg.has_im else np.zeros(cfg.J)
    pattern, _, bits = select_active_and_decide(scores, st.p_bar, cfg)
    diag.block_scores = scores
    diag.pattern = pattern
    return bits, diag


def cmpd_detect(
    y: np.ndarray,
    eff: EffectiveChannel,
    sigma2: float,
    cfg: FrameConfig,
    det_cfg: DetectorConfig = DetectorConfig(kind="cmpd"),
) -> tuple[np.ndarray, Diagnostics]:
    """Customized message passing detection with LLR block ranking."""
    engine = MessagePassingDetector(y, eff, sigma2, cfg, det_cfg)
    st, diag = engine.run()
    if cfg.has_im:
        scores = _block_llr_scores(st.posteriors, engine.graph)
    else:
        scores = np.zeros(cfg.J)
    pattern, _, bits = select_active_and_decide(scores, st.p_bar, cfg)
    diag.block_scores = scores
    diag.pattern = pattern
    return bits, diag


_codeword_cache: dict = {}


def _codewords(cfg: FrameConfig):
    if cfg not in _codeword_cache:
        _codeword_cache[cfg] = enumerate_codewords(cfg)
    return _codeword_cache[cfg]


def ml_detect(
    y: np.ndarray,
    H,
    cfg: FrameConfig,
    cap: int = 2**20,
) -> tuple[np.ndarray, ActivationPattern, np.ndarray]:
    """Exhaustive minimum-distance detection over all codewords.

    H may be an EffectiveChannel, a scipy sparse matrix, or a dense array.
    Raises MLInfeasibleError when 2**payload_bits exceeds the cap.
    """
    from .immap import payload_bits

    n_cand = 2 ** payload_bits(cfg)
    if n_cand > cap:
        raise MLInfeasibleError(
            f"{n_cand} ML candidates exceed cap {cap}; use a message-passing detector"
        )
    if isinstance(H, EffectiveChannel):
        H = H.H
    if sp.issparse(H) and H.shape[0] <= 512:
        H = H.toarray()  # BLAS beats sparse matvecs at these sizes
    bits, X, patterns = _codewords(cfg)
    HX = H @ X
    # ||y - Hx||^2 = ||y||^2 - 2 Re(y^H Hx) + ||Hx||^2; the ||y||^2 term is common
    scores = np.einsum("ij,ij->j", HX.conj(), HX).real - 2.0 * (
        np.conj(np.asarray(y)) @ HX
    ).real
    best = int(np.argmin(scores))
    return bits[best].copy(), patterns[best], X[:, best].copy()


def detect_frame(
    y: np.ndarray,
    eff: EffectiveChannel,
    sigma2: float,
    cfg: FrameConfig,
    det_cfg: DetectorConfig,
    ml_cap: int = 2**20,
) -> tuple[np.ndarray, int]:
    """Dispatch one frame to the configured detector; returns (bits, iterations)."""
    if det_cfg.kind == "ml":
        bits, _, _ = ml_detect(y, eff, cfg, cap=ml_cap)
        return bits, 0
    if det_cfg.kind == "mljsapd":
        bits, diag = mljsapd_detect(y, eff, sigma2, cfg, det_cfg)
    else:
        bits, diag = cmpd_detect(y, eff, sigma2, cfg, det_cfg)
    return bits, diag.iterations


def complexity_per_iteration(cfg: FrameConfig, Z: int, kind: str) -> dict:
    """Documented per-iteration operation counts (real multiplications and
    exponential evaluations) for the message-passing detectors."""
    MN = cfg.M * cfg.N
    Mc = cfg.mod_order
    nb = cfg.blocks_per_subframe
    J = cfg.J
    if kind == "mljsapd":
        mults = MN * Z * (8 * (Mc + 1) + Z + 1) + nb * J * (2 * Z + nb * J + 1) + 2 * J * Z
    elif kind == "cmpd":
        mults = MN * Z * (6 * (Mc + 1) + 1) + MN * (2 * Z + 2 * Mc + 12)
    else:
        return {}
    return {"real_mults": int(mults), "exps": int(MN * Z)}
