"""Matched filtering, the target-response-matrix MLE, and the closed-form
and empirical sensing-MSE metrics for both schemes."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import model
from .errors import DimensionMismatchError, SingularBeamformerError
from .model import SystemConfig, ChannelSet

# B B^H above this condition number is treated as singular rather than
# returning an unstable inverse.
CONDITION_CAP = 1e12

# Relative slack absorbed by feasibility checks; conic solutions sit on
# constraint boundaries. Reported MSE numbers stay raw.
FEASIBILITY_SLACK = 1e-6


@dataclass
class SufficientStatistic:
    """Matched-filter output: Yhat = (1/T) sum_t y[t] s^H[t], Nrx x K."""

    Yhat: np.ndarray
    m: int = 0


@dataclass
class TrmEstimate:
    """Least-squares / ML estimate of the target response matrix, Nrx x Ntx."""

    Ghat: np.ndarray
    m: int = 0


def matched_filter(y, s, m: int = 0) -> SufficientStatistic:
    """Correlate the received slots against the known symbol stream.

    y: Nrx x T received block (or list of per-slot vectors); s: K x T symbols.
    """
    Y = np.asarray(y, dtype=complex)
    if Y.ndim == 1:
        Y = Y[None, :]
    S = s.values if isinstance(s, model.SymbolBlock) else np.asarray(s, dtype=complex)
    if S.ndim == 1:
        S = S[None, :]
    if Y.shape[1] != S.shape[1]:
        raise DimensionMismatchError(f"y has {Y.shape[1]} slots but s has {S.shape[1]}")
    T = S.shape[1]
    return SufficientStatistic(Yhat=(Y @ S.conj().T) / T, m=m)


def _gram_inverse(B: np.ndarray) -> np.ndarray:
    """(B B^H)^{-1} with a condition cap instead of a garbage inverse."""
    gram = B @ B.conj().T
    gram = (gram + gram.conj().T) / 2
    eig = np.linalg.eigvalsh(gram)
    if eig[0] <= 0 or eig[-1] > CONDITION_CAP * eig[0]:
        cond = eig[-1] / eig[0] if eig[0] > 0 else np.inf
        raise SingularBeamformerError(
            f"beamformer gram condition {cond:.3e} exceeds cap {CONDITION_CAP:.0e}"
        )
    return np.linalg.inv(gram)


def mle_trm(stat: SufficientStatistic, W: np.ndarray) -> TrmEstimate:
    """Maximum-likelihood target-response estimate Ghat = Yhat W^H (W W^H)^{-1}."""
    W = np.asarray(W, dtype=complex)
    if stat.Yhat.shape[1] != W.shape[1]:
        raise DimensionMismatchError(
            f"statistic has K={stat.Yhat.shape[1]} but beamformer has K={W.shape[1]}"
        )
    Ghat = stat.Yhat @ W.conj().T @ _gram_inverse(W)
    return TrmEstimate(Ghat=Ghat, m=stat.m)


def sensing_mse_closed(B: np.ndarray, cfg: SystemConfig) -> float:
    """Closed-form estimation MSE (Nrx sigma_r2 / T) tr((B B^H)^{-1}).

    B is the transmit beamformer W in the shared scheme, the radar
    beamformer F in the separated scheme.
    """
    inv = _gram_inverse(np.asarray(B, dtype=complex))
    return float(cfg.Nrx * cfg.sigma_r2 / cfg.T * np.trace(inv).real)


def sensing_feasible(B: np.ndarray, cfg: SystemConfig, m: int,
                     slack: float = FEASIBILITY_SLACK) -> bool:
    """True iff the closed-form sensing MSE meets sensor m's threshold
    (boundary included, with relative solver slack)."""
    return sensing_mse_closed(B, cfg) <= cfg.eta[m] * (1.0 + slack)


def empirical_sensing_mse(cfg: SystemConfig, channels: ChannelSet, beamformers,
                          n_trials: int, seed: int,
                          include_interference: bool = True) -> float:
    """Monte Carlo estimation MSE: average ||G_mm - Ghat_mm||_F^2 over fresh
    symbol and noise draws, matched filter + MLE per trial.

    The default simulates the full received block, so the result carries
    every finite-T effect (cross-sensor interference and the own-symbol
    sample-covariance fluctuation); the gap to the closed form is a
    reportable quantity. include_interference=False instead forms the
    idealized statistic Yhat = G B + N with only the noise matched-filtered,
    the regime the closed form describes exactly.
    """
    B = beamformers.W if cfg.scheme == "shared" else beamformers.F
    total = 0.0
    for trial in range(n_trials):
        S = model.draw_symbols(cfg, "radar", seed=substream_trial(seed, trial))
        D = (model.draw_symbols(cfg, "data", seed=substream_trial(seed, trial))
             if cfg.scheme == "separated" else None)
        for m in range(cfg.M):
            noise = model.sensor_noise_block(cfg, substream_trial(seed, trial), m)
            if include_interference:
                y = model.receive_block_at_sensor(cfg, channels, beamformers, S, D, m, noise)
                stat = matched_filter(y, S[m], m=m)
            else:
                stat = matched_filter(noise, S[m], m=m)
                stat.Yhat = channels.G[m, m] @ B[m] + stat.Yhat
            est = mle_trm(stat, B[m])
            total += float(np.linalg.norm(channels.G[m, m] - est.Ghat) ** 2)
    return total / (n_trials * cfg.M)


def substream_trial(seed: int, trial: int) -> int:
    """Stable per-trial root seed for independent Monte Carlo repetitions."""
    return int(np.random.SeedSequence(entropy=int(seed), spawn_key=(97, int(trial))).generate_state(1)[0])
