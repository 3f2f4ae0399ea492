"""Frame geometry, block tiling, and vectorization tests."""

import numpy as np
import pytest

from otfsim.frame import (
    BPSK,
    QPSK,
    FrameConfig,
    block_id,
    block_units,
    devectorize,
    global_block,
    n_blocks_total,
    subframe_of,
    subframe_units,
    vectorize,
)


def test_constellations_unit_average_power():
    assert np.isclose(np.mean(np.abs(BPSK) ** 2), 1.0)
    assert np.isclose(np.mean(np.abs(QPSK) ** 2), 1.0)


def test_config_invariants():
    cfg = FrameConfig(M=8, N=8, M_hat=4, N_hat=4)
    assert np.isclose(cfg.T * cfg.delta_f, 1.0)
    assert cfg.J == 4 and cfg.M_bar == 2 and cfg.N_bar == 2


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(M=6, N=8),  # M_hat does not divide M
        dict(M=8, N=8, k_hat=5),  # k_hat > M_hat for DeIM
        dict(M=8, N=8, scheme="doim", k_hat=0),
        dict(M=8, N=8, mod_order=8),
        dict(M=8, N=8, scheme="nope"),
        dict(M=8, N=8, scheme="randim", n_act=17),
    ],
)
def test_config_rejects_bad_parameters(kwargs):
    with pytest.raises(ValueError):
        FrameConfig(**kwargs)


def test_subframe_of_examples():
    any_cfg = FrameConfig(M=8, N=8, M_hat=4, N_hat=4)
    assert subframe_of(0, 0, any_cfg) == 1
    # floor(5/4)=1, floor(2/4)=0 -> beta = 1 + 2*0 + 1 = 2
    assert subframe_of(5, 2, any_cfg) == 2
    # floor(1/4)=0, floor(6/4)=1 -> beta = 0 + 2*1 + 1 = 3
    assert subframe_of(1, 6, any_cfg) == 3
    with pytest.raises(ValueError):
        subframe_of(8, 0, any_cfg)


def test_block_units_examples():
    deim = FrameConfig(M=4, N=4, M_hat=4, N_hat=4, scheme="deim")
    assert [tuple(u) for u in block_units(1, deim)] == [(0, 0), (0, 1), (0, 2), (0, 3)]
    doim = FrameConfig(M=4, N=4, M_hat=4, N_hat=4, scheme="doim")
    assert [tuple(u) for u in block_units(2, doim)] == [(0, 1), (1, 1), (2, 1), (3, 1)]
    # beta=2, b=1 of an 8x8 frame with 4x4 subframes -> delay column 4
    big = FrameConfig(M=8, N=8, M_hat=4, N_hat=4, scheme="deim")
    assert global_block(2, 1, big) == 5
    assert [tuple(u) for u in block_units(5, big)] == [(4, 0), (4, 1), (4, 2), (4, 3)]


def test_block_id_bijection():
    for scheme in ("deim", "doim", "randim"):
        cfg = FrameConfig(M=8, N=8, M_hat=4, N_hat=4, scheme=scheme)
        for f in range(1, n_blocks_total(cfg) + 1):
            bid = block_id(f, cfg)
            assert global_block(bid.beta, bid.b, cfg) == f
    with pytest.raises(ValueError):
        block_id(0, cfg)


@pytest.mark.parametrize("scheme", ["deim", "doim", "randim"])
@pytest.mark.parametrize("M,N,Mh,Nh", [(4, 4, 4, 4), (8, 8, 4, 4), (16, 8, 4, 4), (8, 16, 2, 8)])
def test_blocks_tile_each_subframe(scheme, M, N, Mh, Nh):
    cfg = FrameConfig(M=M, N=N, M_hat=Mh, N_hat=Nh, scheme=scheme, k_hat=1)
    nb = cfg.blocks_per_subframe
    covered_total = set()
    for beta in range(1, cfg.J + 1):
        covered = set()
        for b in range(1, nb + 1):
            units = {tuple(u) for u in block_units(global_block(beta, b, cfg), cfg)}
            assert len(units) == cfg.units_per_block
            assert not covered & units, "blocks within a subframe must be disjoint"
            covered |= units
        expected = {tuple(u) for u in subframe_units(beta, cfg)}
        assert covered == expected
        covered_total |= covered
    assert len(covered_total) == M * N


def test_subframes_partition_grid():
    cfg = FrameConfig(M=8, N=16, M_hat=4, N_hat=4)
    count = np.zeros(cfg.J, dtype=int)
    for l in range(cfg.M):
        for k in range(cfg.N):
            count[subframe_of(l, k, cfg) - 1] += 1
    assert (count == cfg.M_hat * cfg.N_hat).all()
    assert count.sum() == cfg.M * cfg.N


def test_vectorize_contract():
    cfg = FrameConfig(M=4, N=4)
    X = np.zeros((4, 4), dtype=complex)
    X[1, 2] = 3.5 - 1j
    assert vectorize(X)[1 + 2 * 4] == 3.5 - 1j
    assert not vectorize(np.zeros((4, 4))).any()


def test_vectorize_round_trip():
    rng = np.random.default_rng(0)
    cfg = FrameConfig(M=4, N=4)
    X = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    assert np.array_equal(devectorize(vectorize(X), cfg), X)
    v = rng.standard_normal(16)
    assert np.array_equal(vectorize(devectorize(v, cfg)), v)
    with pytest.raises(ValueError):
        devectorize(v[:-1], cfg)
