"""Scenario configuration, random channel/symbol synthesis, and the
time-domain transmit/receive equations of the shared and separated schemes.

All powers are stored in watts. Every random quantity is drawn from a named
sub-stream expanded from one root seed, so any component can be re-run in
isolation and still reproduce the full experiment.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DimensionMismatchError

SCHEMES = ("shared", "separated")

# Named RNG sub-streams. The integers are part of the on-disk reproducibility
# contract: changing them changes every seeded draw.
STREAMS = {
    "channels": 0,
    "radar-symbols": 1,
    "data-symbols": 2,
    "sensor-noise": 3,
    "ap-noise": 4,
    "randomization": 5,
}

# Channel families get their own sub-index inside the "channels" stream so a
# scheme change (which drops/adds matrices) never shifts the other draws.
_CHANNEL_FAMILY = {"H": 0, "G": 1, "Q": 2, "R": 3, "C": 4, "O": 5}


def substream(seed: int, name: str, index: int = 0) -> np.random.Generator:
    """Generator for the named sub-stream of a root seed."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(STREAMS[name], int(index)))
    return np.random.default_rng(ss)


def dbm_to_watts(p_dbm: float) -> float:
    """Convert a power from dBm to watts: 10^((p_dbm - 30)/10)."""
    return 10.0 ** ((p_dbm - 30.0) / 10.0)


def complex_gaussian(rng: np.random.Generator, shape, mean=0.0, var=1.0) -> np.ndarray:
    """i.i.d. complex Gaussian entries, total variance `var`, circular about `mean`."""
    s = np.sqrt(var / 2.0)
    return mean + s * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


@dataclass(frozen=True)
class SystemConfig:
    """All scalar parameters of one scenario.

    eta is the per-sensor sensing-MSE threshold (length M). Nc is 0 in the
    shared scheme; in the separated scheme the Ns antennas split into
    Nc data antennas plus Ntx/Nrx radar transmit/receive antennas.
    """

    M: int
    K: int
    Na: int
    Ns: int
    Ntx: int
    Nrx: int
    T: int
    P: float
    sigma_r2: float
    sigma_c2: float
    eta: tuple
    scheme: str = "shared"
    Nc: int = 0
    rician_mean: complex = 1.0 + 0.0j
    rician_var: float = 1.0

    def replace(self, **kw) -> "SystemConfig":
        return dataclasses.replace(self, **kw)


def validate_config(cfg: SystemConfig) -> SystemConfig:
    """Return cfg unchanged iff every invariant holds; otherwise raise
    ConfigError listing all violations."""
    bad = []
    if cfg.scheme not in SCHEMES:
        bad.append(f"unknown scheme {cfg.scheme!r}")
    for name in ("M", "K", "Na", "Ns", "Ntx", "Nrx", "T"):
        v = getattr(cfg, name)
        if not isinstance(v, (int, np.integer)) or v < 1:
            bad.append(f"nonpositive-parameter: {name}={v} (need integer >= 1)")
    if cfg.scheme == "shared":
        if cfg.Nc != 0:
            bad.append(f"dimension-mismatch: shared scheme requires Nc=0, got Nc={cfg.Nc}")
        if cfg.Ns != cfg.Ntx + cfg.Nrx:
            bad.append(
                f"dimension-mismatch: shared scheme requires Ns=Ntx+Nrx, "
                f"got Ns={cfg.Ns}, Ntx+Nrx={cfg.Ntx + cfg.Nrx}"
            )
    elif cfg.scheme == "separated":
        if cfg.Nc < 1:
            bad.append(f"nonpositive-parameter: Nc={cfg.Nc} (need >= 1 in separated scheme)")
        if cfg.Ns != cfg.Nc + cfg.Ntx + cfg.Nrx:
            bad.append(
                f"dimension-mismatch: separated scheme requires Ns=Nc+Ntx+Nrx, "
                f"got Ns={cfg.Ns}, Nc+Ntx+Nrx={cfg.Nc + cfg.Ntx + cfg.Nrx}"
            )
    for name in ("P", "sigma_r2", "sigma_c2", "rician_var"):
        v = getattr(cfg, name)
        if not np.isfinite(v) or v <= 0:
            bad.append(f"nonpositive-parameter: {name}={v}")
    eta = np.atleast_1d(np.asarray(cfg.eta, dtype=float))
    if eta.size != cfg.M:
        bad.append(f"dimension-mismatch: eta has length {eta.size}, need M={cfg.M}")
    if np.any(~np.isfinite(eta)) or np.any(eta <= 0):
        bad.append("nonpositive-parameter: every eta_m must be finite and > 0")
    if bad:
        raise ConfigError(bad)
    return cfg


@dataclass
class ChannelSet:
    """One realization of every channel / target-response matrix.

    H: (M, Na, Ntx|Nc) uplink data channels.
    G: (M, M, Nrx, Ntx) target response matrices; G[i, m] couples sensor i's
       transmission into sensor m's receive array via the target.
    Q: (M, M, Nrx, Ntx) direct radar channels. Diagonal entries are generated
       but never read (the model sums exclude i=m).
    R: (M, Na, Ntx) radar-to-AP channels, separated scheme only.
    C: (M, M, Nrx, Nc) data-reflection channels, separated only; the i=m term
       is part of the received interference.
    O: (M, M, Nrx, Nc) direct data channels, separated only; diagonal unused.
    """

    H: np.ndarray
    G: np.ndarray
    Q: np.ndarray
    R: np.ndarray | None = None
    C: np.ndarray | None = None
    O: np.ndarray | None = None


def draw_channels(cfg: SystemConfig, seed: int) -> ChannelSet:
    """Draw one i.i.d. Rician channel realization (complex Gaussian entries
    with mean rician_mean and total variance rician_var), deterministic in seed."""
    validate_config(cfg)
    mu, var = cfg.rician_mean, cfg.rician_var

    def draw(family: str, shape) -> np.ndarray:
        rng = substream(seed, "channels", _CHANNEL_FAMILY[family])
        return complex_gaussian(rng, shape, mean=mu, var=var)

    ncol = cfg.Ntx if cfg.scheme == "shared" else cfg.Nc
    H = draw("H", (cfg.M, cfg.Na, ncol))
    G = draw("G", (cfg.M, cfg.M, cfg.Nrx, cfg.Ntx))
    Q = draw("Q", (cfg.M, cfg.M, cfg.Nrx, cfg.Ntx))
    if cfg.scheme == "shared":
        return ChannelSet(H=H, G=G, Q=Q)
    R = draw("R", (cfg.M, cfg.Na, cfg.Ntx))
    C = draw("C", (cfg.M, cfg.M, cfg.Nrx, cfg.Nc))
    O = draw("O", (cfg.M, cfg.M, cfg.Nrx, cfg.Nc))
    return ChannelSet(H=H, G=G, Q=Q, R=R, C=C, O=O)


@dataclass
class SymbolBlock:
    """K x T block of unit-variance complex Gaussian symbols for one sensor."""

    values: np.ndarray
    sensor: int = 0
    role: str = "radar"


def draw_symbols(cfg: SystemConfig, role: str, seed: int, n_slots: int | None = None) -> list:
    """K x T standard complex Gaussian symbol blocks, one per sensor.

    The radar and data roles consume disjoint RNG sub-streams, so the two
    symbol families are independent even under the same seed.
    """
    if role not in ("radar", "data"):
        raise ValueError(f"role must be 'radar' or 'data', got {role!r}")
    T = cfg.T if n_slots is None else int(n_slots)
    rng = substream(seed, f"{role}-symbols")
    all_blocks = complex_gaussian(rng, (cfg.M, cfg.K, T))
    return [SymbolBlock(values=all_blocks[m], sensor=m, role=role) for m in range(cfg.M)]


def _as_block(s) -> np.ndarray:
    return s.values if isinstance(s, SymbolBlock) else np.asarray(s)


def transmit(cfg: SystemConfig, W: np.ndarray, s: np.ndarray, F: np.ndarray | None = None,
             d: np.ndarray | None = None) -> np.ndarray:
    """Per-slot transmitted vector of one sensor.

    Shared: x = W s. Separated: x = [W d; F s], data antennas on top.
    """
    W = np.asarray(W)
    s = np.asarray(s)
    if cfg.scheme == "shared":
        if F is not None or d is not None:
            raise DimensionMismatchError("shared scheme takes no radar beamformer F or data symbols d")
        if W.shape != (cfg.Ntx, cfg.K) or s.shape[0] != cfg.K:
            raise DimensionMismatchError(f"shared transmit needs W ({cfg.Ntx},{cfg.K}) and s of length {cfg.K}")
        return W @ s
    if F is None or d is None:
        raise DimensionMismatchError("separated scheme needs both F and d")
    F = np.asarray(F)
    d = np.asarray(d)
    if W.shape != (cfg.Nc, cfg.K) or F.shape != (cfg.Ntx, cfg.K):
        raise DimensionMismatchError(
            f"separated transmit needs W ({cfg.Nc},{cfg.K}) and F ({cfg.Ntx},{cfg.K}), "
            f"got {W.shape} and {F.shape}"
        )
    if d.shape[0] != cfg.K or s.shape[0] != cfg.K:
        raise DimensionMismatchError(f"symbol vectors must have length K={cfg.K}")
    return np.concatenate([W @ d, F @ s], axis=0)


def sensor_noise_block(cfg: SystemConfig, noise_seed: int, m: int, n_slots: int | None = None) -> np.ndarray:
    """Nrx x T radar-channel noise for sensor m, covariance sigma_r2 * I per slot."""
    T = cfg.T if n_slots is None else int(n_slots)
    rng = substream(noise_seed, "sensor-noise", m)
    return complex_gaussian(rng, (cfg.Nrx, T), var=cfg.sigma_r2)


def ap_noise_block(cfg: SystemConfig, noise_seed: int, n_slots: int | None = None) -> np.ndarray:
    """Na x T data-channel noise at the AP, covariance sigma_c2 * I per slot."""
    T = cfg.T if n_slots is None else int(n_slots)
    rng = substream(noise_seed, "ap-noise")
    return complex_gaussian(rng, (cfg.Na, T), var=cfg.sigma_c2)


def receive_block_at_sensor(cfg: SystemConfig, channels: ChannelSet, beamformers,
                            radar_symbols: list, data_symbols: list | None, m: int,
                            noise: np.ndarray | None) -> np.ndarray:
    """All T received slots at sensor m as an Nrx x T matrix.

    Shared: own target echo plus (G_im + Q_im) interference from every other
    sensor plus noise. Separated: radar echo through F plus the data-reflection
    term C_im W_i d_i for all i (own sensor included) and the G/Q/O leakage
    from the other sensors.
    """
    W = beamformers.W
    S = [_as_block(s) for s in radar_symbols]
    y = np.zeros((cfg.Nrx, S[m].shape[1]), dtype=complex)
    if cfg.scheme == "shared":
        y += channels.G[m, m] @ (W[m] @ S[m])
        for i in range(cfg.M):
            if i == m:
                continue
            y += (channels.G[i, m] + channels.Q[i, m]) @ (W[i] @ S[i])
    else:
        F = beamformers.F
        D = [_as_block(d) for d in data_symbols]
        y += channels.G[m, m] @ (F[m] @ S[m])
        for i in range(cfg.M):
            y += channels.C[i, m] @ (W[i] @ D[i])
            if i == m:
                continue
            y += (channels.G[i, m] + channels.Q[i, m]) @ (F[i] @ S[i])
            y += channels.O[i, m] @ (W[i] @ D[i])
    if noise is not None:
        y += noise
    return y


def receive_at_sensor(cfg: SystemConfig, channels: ChannelSet, beamformers,
                      radar_symbols: list, t: int, m: int, noise_seed: int,
                      data_symbols: list | None = None) -> np.ndarray:
    """Received Nrx vector at sensor m in slot t (0-based), including noise."""
    T = _as_block(radar_symbols[m]).shape[1]
    if not 0 <= t < T:
        raise DimensionMismatchError(f"slot index t={t} outside [0, {T})")
    noise = sensor_noise_block(cfg, noise_seed, m, n_slots=T)
    y = receive_block_at_sensor(cfg, channels, beamformers, radar_symbols, data_symbols, m, noise)
    return y[:, t]


def receive_block_at_ap(cfg: SystemConfig, channels: ChannelSet, beamformers,
                        radar_symbols: list | None, data_symbols: list | None,
                        noise: np.ndarray | None) -> np.ndarray:
    """All T aggregated slots at the AP as a K x T matrix.

    Shared: z = A^H sum_m H_m W_m s_m + A^H n. Separated: data symbols ride
    through H_m W_m and the radar signals leak in through R_m F_m.
    """
    A = beamformers.A
    W = beamformers.W
    if A.shape != (cfg.Na, cfg.K):
        raise DimensionMismatchError(f"A must be ({cfg.Na},{cfg.K}), got {A.shape}")
    if cfg.scheme == "shared":
        S = [_as_block(s) for s in radar_symbols]
        rx = np.zeros((cfg.Na, S[0].shape[1]), dtype=complex)
        for i in range(cfg.M):
            rx += channels.H[i] @ (W[i] @ S[i])
    else:
        F = beamformers.F
        S = [_as_block(s) for s in radar_symbols]
        D = [_as_block(d) for d in data_symbols]
        rx = np.zeros((cfg.Na, D[0].shape[1]), dtype=complex)
        for i in range(cfg.M):
            rx += channels.H[i] @ (W[i] @ D[i])
            rx += channels.R[i] @ (F[i] @ S[i])
    if noise is not None:
        rx += noise
    return A.conj().T @ rx


def receive_at_ap(cfg: SystemConfig, channels: ChannelSet, beamformers,
                  radar_symbols: list, t: int, noise_seed: int,
                  data_symbols: list | None = None) -> np.ndarray:
    """Aggregated K vector at the AP in slot t (0-based), including noise."""
    blocks = radar_symbols if cfg.scheme == "shared" else data_symbols
    T = _as_block(blocks[0]).shape[1]
    if not 0 <= t < T:
        raise DimensionMismatchError(f"slot index t={t} outside [0, {T})")
    noise = ap_noise_block(cfg, noise_seed, n_slots=T)
    z = receive_block_at_ap(cfg, channels, beamformers, radar_symbols, data_symbols, noise)
    return z[:, t]


# ---------------------------------------------------------------------------
# Scenario files: flat key = value text, keys named exactly as SystemConfig
# fields (powers in watts). `eta` takes either one value (broadcast to M) or
# M comma-separated values. An optional `seed` line travels with the file.
# ---------------------------------------------------------------------------

_INT_FIELDS = ("M", "K", "Na", "Ns", "Ntx", "Nrx", "Nc", "T")
_FLOAT_FIELDS = ("P", "sigma_r2", "sigma_c2", "rician_var")


def save_scenario(path: str, cfg: SystemConfig, seed: int | None = None) -> None:
    lines = [f"scheme = {cfg.scheme}"]
    for name in _INT_FIELDS:
        lines.append(f"{name} = {getattr(cfg, name)}")
    for name in _FLOAT_FIELDS:
        lines.append(f"{name} = {getattr(cfg, name):.17g}")
    mu = complex(cfg.rician_mean)
    lines.append(f"rician_mean = {mu.real:.17g}{mu.imag:+.17g}j")
    lines.append("eta = " + ", ".join(f"{e:.17g}" for e in cfg.eta))
    if seed is not None:
        lines.append(f"seed = {seed}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def load_scenario(path: str):
    """Read a scenario file; returns (SystemConfig, seed-or-None), validated."""
    raw = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError([f"{path}:{lineno}: expected 'key = value', got {line!r}"])
            key, val = (part.strip() for part in line.split("=", 1))
            raw[key] = val
    kw = {}
    for name in _INT_FIELDS:
        if name in raw:
            kw[name] = int(raw.pop(name))
    for name in _FLOAT_FIELDS:
        if name in raw:
            kw[name] = float(raw.pop(name))
    if "scheme" in raw:
        kw["scheme"] = raw.pop("scheme")
    if "rician_mean" in raw:
        kw["rician_mean"] = complex(raw.pop("rician_mean").replace(" ", ""))
    seed = int(raw.pop("seed")) if "seed" in raw else None
    if "eta" in raw:
        vals = tuple(float(v) for v in raw.pop("eta").split(","))
        if len(vals) == 1:
            vals = vals * kw.get("M", 1)
        kw["eta"] = vals
    if raw:
        raise ConfigError([f"unknown scenario keys: {sorted(raw)}"])
    missing = [n for n in ("M", "K", "Na", "Ns", "Ntx", "Nrx", "T", "P", "sigma_r2", "sigma_c2", "eta")
               if n not in kw]
    if missing:
        raise ConfigError([f"scenario file missing keys: {missing}"])
    return validate_config(SystemConfig(**kw)), seed
