"""Computation-error metrics: closed-form and empirical mean squared error
of the aggregated function values at the AP."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import model
from .errors import DimensionMismatchError
from .model import ChannelSet, SystemConfig


@dataclass
class AirCompReport:
    """Decomposed computation error.

    mse_closed = misalignment_term + radar_leak_term + noise_term; the target
    function is the plain sum of the per-sensor symbol vectors, so the
    misalignment term measures how far each A^H H_m W_m sits from identity.
    """

    mse_closed: float
    mse_normalized: float
    misalignment_term: float
    radar_leak_term: float
    noise_term: float
    mse_empirical: float = float("nan")


def aircomp_mse_closed(cfg: SystemConfig, channels: ChannelSet, bf) -> AirCompReport:
    """Expected squared error between the aggregated output and the symbol sum.

    Shared: sum_m ||A^H H_m W_m - I||_F^2 + sigma_c2 tr(A A^H).
    Separated adds the radar leak sum_m tr(A^H R_m F_m F_m^H R_m^H A).
    """
    A = np.asarray(bf.A)
    if A.shape != (cfg.Na, cfg.K):
        raise DimensionMismatchError(f"A must be ({cfg.Na},{cfg.K}), got {A.shape}")
    eye = np.eye(cfg.K)
    misalign = 0.0
    for m in range(cfg.M):
        E = A.conj().T @ channels.H[m] @ bf.W[m] - eye
        misalign += float(np.linalg.norm(E) ** 2)
    leak = 0.0
    if cfg.scheme == "separated":
        for m in range(cfg.M):
            leak += float(np.linalg.norm(A.conj().T @ channels.R[m] @ bf.F[m]) ** 2)
    noise = cfg.sigma_c2 * float(np.linalg.norm(A) ** 2)
    mse = misalign + leak + noise
    return AirCompReport(mse_closed=mse, mse_normalized=mse / cfg.M,
                         misalignment_term=misalign, radar_leak_term=leak,
                         noise_term=noise)


def aircomp_mse_empirical(cfg: SystemConfig, channels: ChannelSet, bf,
                          n_slots: int, seed: int) -> float:
    """Monte Carlo computation error over n_slots fresh transmissions:
    mean ||z[t] - sum_m s_m[t]||^2 with fresh symbols and AP noise."""
    if n_slots < 1:
        raise DimensionMismatchError("n_slots must be >= 1")
    S = model.draw_symbols(cfg, "radar", seed, n_slots=n_slots)
    D = model.draw_symbols(cfg, "data", seed, n_slots=n_slots) if cfg.scheme == "separated" else None
    noise = model.ap_noise_block(cfg, seed, n_slots=n_slots)
    z = model.receive_block_at_ap(cfg, channels, bf, S, D, noise)
    payload = S if cfg.scheme == "shared" else D
    target = np.sum([blk.values for blk in payload], axis=0)
    return float(np.mean(np.sum(np.abs(z - target) ** 2, axis=0)))
