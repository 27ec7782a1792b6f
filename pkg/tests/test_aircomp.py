import numpy as np
import pytest

from otasense import aircomp, beamform, model
from otasense.beamform import BeamformerSet
from otasense.errors import DimensionMismatchError
from otasense.model import ChannelSet, SystemConfig


def rand_complex(rng, shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def shared_cfg(**kw):
    base = dict(M=2, K=2, Na=4, Ns=4, Ntx=2, Nrx=2, T=100, P=1.0,
                sigma_r2=1.0, sigma_c2=0.25, eta=(0.5, 0.5), scheme="shared")
    base.update(kw)
    return SystemConfig(**base)


def separated_cfg(**kw):
    base = dict(M=2, K=2, Na=4, Ns=6, Nc=2, Ntx=2, Nrx=2, T=100, P=1.0,
                sigma_r2=1.0, sigma_c2=0.25, eta=(0.5, 0.5), scheme="separated")
    base.update(kw)
    return SystemConfig(**base)


class TestClosedForm:
    def test_zero_aggregator_counts_symbol_power(self):
        # A = 0: each sensor contributes tr(I_K) = K
        cfg = shared_cfg()
        ch = model.draw_channels(cfg, 0)
        bf = BeamformerSet(A=np.zeros((4, 2), dtype=complex),
                           W=[np.zeros((2, 2))] * 2)
        rep = aircomp.aircomp_mse_closed(cfg, ch, bf)
        assert rep.mse_closed == pytest.approx(cfg.M * cfg.K)
        assert rep.noise_term == 0.0
        assert rep.mse_normalized == pytest.approx(cfg.K)

    def test_exact_zero_forcing_leaves_noise_only(self):
        cfg = shared_cfg(M=1, eta=(0.5,))
        ch = model.draw_channels(cfg, 1)
        rng = np.random.default_rng(2)
        A = rand_complex(rng, (4, 2))
        W = beamform.zero_forcing(A, ch.H[0])
        bf = BeamformerSet(A=A, W=[W])
        rep = aircomp.aircomp_mse_closed(cfg, ch, bf)
        assert rep.misalignment_term < 1e-10 * rep.mse_closed
        assert rep.mse_closed == pytest.approx(cfg.sigma_c2 * np.linalg.norm(A) ** 2,
                                               rel=1e-10)

    def test_separated_zero_radar_matches_shared_formula(self):
        cfg_sep = separated_cfg()
        ch = model.draw_channels(cfg_sep, 3)
        rng = np.random.default_rng(4)
        A = rand_complex(rng, (4, 2))
        W = [rand_complex(rng, (2, 2)) for _ in range(2)]
        bf_sep = BeamformerSet(A=A, W=W, F=[np.zeros((2, 2))] * 2, alpha=[0.0, 0.0])
        rep_sep = aircomp.aircomp_mse_closed(cfg_sep, ch, bf_sep)
        cfg_sh = shared_cfg()
        ch_sh = ChannelSet(H=ch.H, G=ch.G, Q=ch.Q)
        rep_sh = aircomp.aircomp_mse_closed(cfg_sh, ch_sh, BeamformerSet(A=A, W=W))
        assert rep_sep.radar_leak_term == 0.0
        assert rep_sep.mse_closed == pytest.approx(rep_sh.mse_closed, rel=1e-12)

    def test_decomposition_sums(self):
        cfg = separated_cfg()
        ch = model.draw_channels(cfg, 5)
        rng = np.random.default_rng(6)
        bf = BeamformerSet(A=rand_complex(rng, (4, 2)),
                           W=[rand_complex(rng, (2, 2)) for _ in range(2)],
                           F=[rand_complex(rng, (2, 2)) for _ in range(2)],
                           alpha=[0.1, 0.1])
        rep = aircomp.aircomp_mse_closed(cfg, ch, bf)
        assert rep.mse_closed == pytest.approx(
            rep.misalignment_term + rep.radar_leak_term + rep.noise_term)
        assert min(rep.misalignment_term, rep.radar_leak_term, rep.noise_term) >= 0

    def test_dimension_check(self):
        cfg = shared_cfg()
        ch = model.draw_channels(cfg, 0)
        with pytest.raises(DimensionMismatchError):
            aircomp.aircomp_mse_closed(cfg, ch, BeamformerSet(A=np.zeros((3, 2)),
                                                              W=[np.eye(2)] * 2))


class TestEmpirical:
    def test_agrees_with_closed_form(self):
        cfg = shared_cfg()
        ch = model.draw_channels(cfg, 7)
        rng = np.random.default_rng(8)
        A = 0.1 * rand_complex(rng, (4, 2))
        W = [0.5 * rand_complex(rng, (2, 2)) for _ in range(2)]
        bf = BeamformerSet(A=A, W=W)
        rep = aircomp.aircomp_mse_closed(cfg, ch, bf)
        emp = aircomp.aircomp_mse_empirical(cfg, ch, bf, n_slots=10_000, seed=9)
        assert emp == pytest.approx(rep.mse_closed, rel=0.10)

    def test_separated_agrees_with_closed_form(self):
        cfg = separated_cfg()
        ch = model.draw_channels(cfg, 10)
        rng = np.random.default_rng(11)
        bf = BeamformerSet(A=0.1 * rand_complex(rng, (4, 2)),
                           W=[0.4 * rand_complex(rng, (2, 2)) for _ in range(2)],
                           F=[0.3 * rand_complex(rng, (2, 2)) for _ in range(2)],
                           alpha=[0.1, 0.1])
        rep = aircomp.aircomp_mse_closed(cfg, ch, bf)
        emp = aircomp.aircomp_mse_empirical(cfg, ch, bf, n_slots=10_000, seed=12)
        assert emp == pytest.approx(rep.mse_closed, rel=0.10)

    def test_noiseless_exact_zero_forcing_is_lossless(self):
        cfg = shared_cfg(M=1, sigma_c2=1e-300, eta=(0.5,))
        ch = model.draw_channels(cfg, 13)
        A = np.linalg.pinv(ch.H[0]).conj().T  # A^H H = I with W = I
        bf = BeamformerSet(A=A, W=[np.eye(2)])
        emp = aircomp.aircomp_mse_empirical(cfg, ch, bf, n_slots=200, seed=14)
        assert emp < 1e-20

    def test_noise_only_power(self):
        # perfect equalization leaves ||A^H n||^2 with mean sigma_c2 tr(A A^H)
        cfg = shared_cfg(M=1, Na=2, sigma_c2=0.5, eta=(0.5,))
        ch = model.draw_channels(cfg, 15)
        A = np.linalg.inv(ch.H[0].conj().T)
        bf = BeamformerSet(A=A, W=[np.eye(2)])
        emp = aircomp.aircomp_mse_empirical(cfg, ch, bf, n_slots=50_000, seed=16)
        assert emp == pytest.approx(cfg.sigma_c2 * np.linalg.norm(A) ** 2, rel=0.05)

    def test_slot_count_validated(self):
        cfg = shared_cfg()
        ch = model.draw_channels(cfg, 0)
        bf = BeamformerSet(A=np.zeros((4, 2)), W=[np.eye(2)] * 2)
        with pytest.raises(DimensionMismatchError):
            aircomp.aircomp_mse_empirical(cfg, ch, bf, n_slots=0, seed=0)
