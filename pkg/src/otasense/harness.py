"""Experiment runner: parameter sweeps over the scenario dimensions, the
sensing-MSE evaluation, the localization demo, and machine-readable output.

Every cell records one ExperimentRecord per (scheme, realization). All
schemes and baselines inside a cell consume the identical channel draw, and
realization seeds are shared across swept values so trend curves use common
random numbers.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, fields

import numpy as np

from . import aircomp, beamform, localization, model, sensing
from .errors import (HarnessError, InfeasibleError, NoFeasibleSampleError,
                     RadarPowerError, SingularBeamformerError,
                     SingularEqualizerError, SolverFailureError)
from .model import SystemConfig

SWEEP_VARIABLES = ("na", "ns", "m", "k")
_SWEEP_IDS = {"na": 11, "ns": 12, "m": 13, "k": 14, "loc": 15}

_DESIGN_ERRORS = (InfeasibleError, NoFeasibleSampleError, RadarPowerError,
                  SolverFailureError, SingularEqualizerError, SingularBeamformerError)


@dataclass(eq=False)
class ExperimentRecord:
    """One Monte Carlo cell result. wall_time is informational only and is
    excluded from emitted files so identical runs stay byte-identical.

    Unmeasured fields hold NaN; equality treats NaN entries as equal so
    serialization round trips compare cleanly.
    """

    sweep_variable: str
    value: float
    scheme: str
    seed: int
    status: str
    mse_closed: float = float("nan")
    mse_empirical: float = float("nan")
    mse_normalized: float = float("nan")
    misalignment_term: float = float("nan")
    radar_leak_term: float = float("nan")
    noise_term: float = float("nan")
    sensing_mse: tuple = ()
    eta: float = float("nan")
    sdr_bound: float = float("nan")
    gap: float = float("nan")
    wall_time: float = 0.0

    def __eq__(self, other):
        if not isinstance(other, ExperimentRecord):
            return NotImplemented

        def same(a, b):
            if isinstance(a, float) and isinstance(b, float):
                return a == b or (np.isnan(a) and np.isnan(b))
            return a == b

        return all(same(getattr(self, f.name), getattr(other, f.name))
                   for f in fields(self))


# frozen output schema; sensing_mse is a ';'-joined list in CSV
CSV_COLUMNS = [f.name for f in fields(ExperimentRecord) if f.name != "wall_time"]


DEMO_BETA = localization.DEMO_BETA


def default_config(scheme: str = "shared") -> SystemConfig:
    """Reference scenario: 10 sensors with 12 antennas, 10 functions, a
    15-antenna AP, 1000 slots, 10 mW budget, -79.5 dBm noise on both links."""
    noise = model.dbm_to_watts(-79.5)
    P = model.dbm_to_watts(10.0)
    cfg = SystemConfig(M=10, K=10, Na=15, Ns=12, Ntx=6, Nrx=6, T=1000, P=P,
                       sigma_r2=noise, sigma_c2=noise, eta=(1.0,) * 10,
                       scheme="shared")
    eta = beamform.default_eta(cfg.Ntx, cfg.Nrx, cfg.T, cfg.P, cfg.sigma_r2)
    cfg = cfg.replace(eta=(eta,) * cfg.M)
    if scheme == "separated":
        return _to_separated(cfg)
    return model.validate_config(cfg)


def default_localization_config(geom, na: int = 4, T: int = 40000,
                                P: float = 5e-6,
                                eta_margin: float = 200.0) -> SystemConfig:
    """Scenario matched to a localization geometry: the two position
    coordinates ride as K=2 functions on the shared scheme.

    Defaults are calibrated so that angle errors are estimation-noise driven,
    aggregation visibly beats single sensors at -79.5 dBm, and the stronger
    -59.5 dBm channel noise visibly degrades the aggregate. The generous eta
    margin keeps the rank-2 aggregation design feasible (the relaxed optimum
    has rank 3 on this scenario, so randomization needs scaling headroom).
    """
    noise = model.dbm_to_watts(-79.5)
    cfg = SystemConfig(M=geom.n_sensors, K=2, Na=na, Ns=geom.n_tx + geom.n_rx,
                       Ntx=geom.n_tx, Nrx=geom.n_rx, T=T, P=P,
                       sigma_r2=noise, sigma_c2=noise,
                       eta=(1.0,) * geom.n_sensors, scheme="shared")
    eta = beamform.default_eta(cfg.Ntx, cfg.Nrx, cfg.T, cfg.P, cfg.sigma_r2,
                               margin=eta_margin)
    return model.validate_config(cfg.replace(eta=(eta,) * cfg.M))


def _split_shared(ns: int) -> tuple:
    ntx = ns // 2
    return ntx, ns - ntx


def _split_separated(ns: int) -> tuple:
    nc = ns // 3
    ntx = ns // 3
    return nc, ntx, ns - nc - ntx


def _to_separated(cfg: SystemConfig) -> SystemConfig:
    nc, ntx, nrx = _split_separated(cfg.Ns)
    out = cfg.replace(scheme="separated", Nc=nc, Ntx=ntx, Nrx=nrx)
    eta = beamform.default_eta(out.Ntx, out.Nrx, out.T, out.P, out.sigma_r2)
    return model.validate_config(out.replace(eta=(eta,) * out.M))


def derive_cell_configs(base_cfg: SystemConfig, variable: str, value: int,
                        eta_margin: float = 2.0) -> dict:
    """Shared and separated configs for one sweep cell.

    Antenna splits keep the reference proportions: shared Ntx=Nrx=Ns/2;
    separated Nc=Ntx=Ns/3 with the remainder on Nrx. eta is re-derived per
    scheme (it depends on the scheme's Ntx) and recorded in every record.
    """
    if variable not in SWEEP_VARIABLES:
        raise HarnessError(f"unknown sweep variable {variable!r}")
    kw = {}
    if variable == "na":
        kw["Na"] = int(value)
    elif variable == "m":
        kw["M"] = int(value)
    elif variable == "k":
        kw["K"] = int(value)
    elif variable == "ns":
        kw["Ns"] = int(value)
    out = {}
    for scheme in ("shared", "separated"):
        cfg = base_cfg.replace(scheme=scheme, **kw)
        if scheme == "shared":
            ntx, nrx = _split_shared(cfg.Ns)
            cfg = cfg.replace(Nc=0, Ntx=ntx, Nrx=nrx)
        else:
            nc, ntx, nrx = _split_separated(cfg.Ns)
            cfg = cfg.replace(Nc=nc, Ntx=ntx, Nrx=nrx)
        eta = beamform.default_eta(cfg.Ntx, cfg.Nrx, cfg.T, cfg.P, cfg.sigma_r2,
                                   margin=eta_margin)
        cfg = cfg.replace(eta=(eta,) * cfg.M)
        out[scheme] = model.validate_config(cfg)
    return out


def realization_seed(root_seed: int, variable: str, realization: int) -> int:
    """Shared across swept values (common random numbers), distinct across
    sweep variables and realizations."""
    ss = np.random.SeedSequence(entropy=int(root_seed),
                                spawn_key=(_SWEEP_IDS[variable], int(realization)))
    return int(ss.generate_state(1)[0])


def _sensing_mse_per_sensor(cfg: SystemConfig, bf) -> tuple:
    B = bf.W if cfg.scheme == "shared" else bf.F
    return tuple(sensing.sensing_mse_closed(B[m], cfg) for m in range(cfg.M))


def _record_for(cfg: SystemConfig, channels, bf, variable, value, seed,
                n_slots, status="ok", sdr_bound=float("nan"),
                gap=float("nan"), wall_time=0.0, scheme_label=None) -> ExperimentRecord:
    report = aircomp.aircomp_mse_closed(cfg, channels, bf)
    emp = aircomp.aircomp_mse_empirical(cfg, channels, bf, n_slots, seed) if n_slots else float("nan")
    return ExperimentRecord(
        sweep_variable=variable, value=float(value),
        scheme=scheme_label or cfg.scheme, seed=seed, status=status,
        mse_closed=report.mse_closed, mse_empirical=emp,
        mse_normalized=report.mse_normalized,
        misalignment_term=report.misalignment_term,
        radar_leak_term=report.radar_leak_term,
        noise_term=report.noise_term,
        sensing_mse=_sensing_mse_per_sensor(cfg, bf),
        eta=float(cfg.eta[0]), sdr_bound=sdr_bound, gap=gap,
        wall_time=wall_time,
    )


def _failed(variable, value, scheme, seed, exc) -> ExperimentRecord:
    return ExperimentRecord(sweep_variable=variable, value=float(value),
                            scheme=scheme, seed=seed,
                            status=f"failed:{type(exc).__name__}")


def run_sweep(base_cfg: SystemConfig, variable: str, values, n_realizations: int = 10,
              seed: int = 0, schemes=("shared", "separated"), baselines: bool = True,
              n_samples: int = 50, n_slots: int = 10000, eta_margin: float = 2.0,
              tol: float = 1e-9) -> list:
    """Both optimized schemes (plus antenna-selection baselines scaled to the
    optimized norm) on identical channel draws, per value and realization.
    Per-cell failures are recorded and the sweep continues."""
    records = []
    for value in values:
        cfgs = derive_cell_configs(base_cfg, variable, value, eta_margin)
        for r in range(n_realizations):
            cell_seed = realization_seed(seed, variable, r)
            for scheme in schemes:
                cfg = cfgs[scheme]
                channels = model.draw_channels(cfg, cell_seed)
                t0 = time.perf_counter()
                try:
                    res = beamform.design(cfg, channels, n_samples=n_samples,
                                          seed=cell_seed, tol=tol)
                except _DESIGN_ERRORS as exc:
                    records.append(_failed(variable, value, scheme, cell_seed, exc))
                    if baselines:
                        records.append(_failed(variable, value, scheme + "-as",
                                               cell_seed, exc))
                    continue
                wall = time.perf_counter() - t0
                records.append(_record_for(
                    cfg, channels, res.beamformers, variable, value, cell_seed,
                    n_slots, sdr_bound=res.sdr_bound, gap=res.gap, wall_time=wall))
                if baselines:
                    ref_norm = float(np.linalg.norm(res.beamformers.A) ** 2)
                    try:
                        bf_as = beamform.antenna_selection_baseline(cfg, channels, ref_norm)
                        records.append(_record_for(
                            cfg, channels, bf_as, variable, value, cell_seed,
                            n_slots, scheme_label=scheme + "-as"))
                    except _DESIGN_ERRORS as exc:
                        records.append(_failed(variable, value, scheme + "-as",
                                               cell_seed, exc))
    return records


def run_sensing_eval(base_cfg: SystemConfig, na_values, ns_values,
                     n_realizations: int = 1, seed: int = 0, n_samples: int = 50,
                     eta_margin: float = 2.0, tol: float = 1e-9) -> list:
    """Achieved sensing MSE of both optimized schemes across antenna counts.

    The separated scheme must sit exactly on its threshold (the radar
    beamformer is built that way); the shared scheme must satisfy it. Records
    violating either contract are marked failed.
    """
    records = []
    cells = [("na", v) for v in na_values] + [("ns", v) for v in ns_values]
    for variable, value in cells:
        cfgs = derive_cell_configs(base_cfg, variable, value, eta_margin)
        for r in range(n_realizations):
            cell_seed = realization_seed(seed, variable, r)
            for scheme in ("shared", "separated"):
                cfg = cfgs[scheme]
                channels = model.draw_channels(cfg, cell_seed)
                try:
                    res = beamform.design(cfg, channels, n_samples=n_samples,
                                          seed=cell_seed, tol=tol)
                except _DESIGN_ERRORS as exc:
                    records.append(_failed(variable, value, scheme, cell_seed, exc))
                    continue
                rec = _record_for(cfg, channels, res.beamformers, variable, value,
                                  cell_seed, n_slots=0, sdr_bound=res.sdr_bound,
                                  gap=res.gap)
                worst = max(rec.sensing_mse)
                eta = cfg.eta[0]
                if scheme == "separated" and abs(worst - eta) > 1e-6 * eta:
                    rec.status = "failed:separated-off-threshold"
                elif worst > eta * (1 + 1e-6):
                    rec.status = "failed:threshold-violated"
                records.append(rec)
    return records


def run_localization_demo(geom, cfg: SystemConfig, noise_dbm: float, seed: int,
                          beta: complex = DEMO_BETA, n_samples: int = 100,
                          design_result=None):
    """Wrap the localization pipeline with the data-channel noise given in
    dBm; returns (LocalizationResult, scatter rows (label, x, y)).

    geom is a Geometry or the path of a geometry file.
    """
    if isinstance(geom, (str, bytes)):
        geom = localization.load_geometry(geom)
    cfg = cfg.replace(sigma_c2=model.dbm_to_watts(noise_dbm))
    result = localization.run_localization(cfg, geom, seed, beta=beta,
                                           n_samples=n_samples,
                                           design_result=design_result)
    rows = [("truth", result.truth[0], result.truth[1]),
            ("aggregated", result.aggregated[0], result.aggregated[1]),
            ("aoa", result.aoa[0], result.aoa[1])]
    for m, est in enumerate(result.estimates):
        rows.append((f"sensor-{m}", est.position[0], est.position[1]))
    return result, rows


def write_xy_csv(rows, path: str) -> None:
    """label,x,y scatter file with 17-significant-digit floats."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("label,x,y\n")
        for label, x, y in rows:
            fh.write(f"{label},{x:.17g},{y:.17g}\n")


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.17g}"
    return str(v)


def sorted_records(records) -> list:
    return sorted(records, key=lambda r: (r.sweep_variable, r.value, r.scheme, r.seed))


def emit(records, fmt: str, path: str) -> None:
    """Write records as CSV or JSON; byte-stable for identical records
    (fixed column order, 17-significant-digit floats, sorted rows)."""
    if not records:
        raise HarnessError("nonempty-required: no records to emit")
    if fmt not in ("csv", "json"):
        raise HarnessError(f"unknown format {fmt!r}")
    recs = sorted_records(records)
    if fmt == "csv":
        lines = [",".join(CSV_COLUMNS)]
        for r in recs:
            row = []
            for col in CSV_COLUMNS:
                v = getattr(r, col)
                if col == "sensing_mse":
                    row.append(";".join(f"{x:.17g}" for x in v))
                else:
                    row.append(_fmt(v))
            lines.append(",".join(row))
        text = "\n".join(lines) + "\n"
    else:
        payload = []
        for r in recs:
            d = {}
            for col in CSV_COLUMNS:
                v = getattr(r, col)
                d[col] = list(v) if col == "sensing_mse" else v
            payload.append(d)
        text = json.dumps({"records": payload}, indent=1)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def load_records(path: str) -> list:
    """Read back a JSON emit; wall_time is not serialized and comes back 0."""
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    out = []
    for d in payload["records"]:
        d = dict(d)
        d["sensing_mse"] = tuple(d["sensing_mse"])
        out.append(ExperimentRecord(**d))
    return out


def aggregate_mean(records, field_name: str = "mse_normalized") -> list:
    """Mean of one field over ok records, per (sweep_variable, value, scheme);
    rows sorted, each (variable, value, scheme, mean, count)."""
    cells = {}
    for r in records:
        if r.status != "ok":
            continue
        key = (r.sweep_variable, r.value, r.scheme)
        cells.setdefault(key, []).append(getattr(r, field_name))
    out = []
    for key in sorted(cells):
        vals = cells[key]
        out.append((*key, float(np.mean(vals)), len(vals)))
    return out
