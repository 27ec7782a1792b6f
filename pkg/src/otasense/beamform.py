"""Beamformer design for both schemes: zero-forcing transmit beamformers,
the PSD-cone programs for the aggregation matrix, Gaussian randomization,
the orthogonal radar beamformer, and the antenna-selection baselines."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import conic, model
from .conic import ConicBlock, ConicProblem, ConicSolution, LinearConstraint, embed_hermitian
from .errors import (DimensionMismatchError, InfeasibleError, NoFeasibleSampleError,
                     RadarPowerError, SingularEqualizerError, SolverFailureError)
from .model import ChannelSet, SystemConfig

POWER_SLACK = 1e-6


@dataclass
class BeamformerSet:
    """Designed matrices: AP aggregation beamformer A (Na x K), per-sensor
    transmit/data beamformers W, and for the separated scheme the radar
    beamformers F = sqrt(alpha) D with orthonormal-row D."""

    A: np.ndarray
    W: list
    F: list | None = None
    alpha: list | None = None


@dataclass
class DesignResult:
    """BeamformerSet plus the solver artifacts the experiment runner reports."""

    beamformers: BeamformerSet
    solution: ConicSolution
    problem: ConicProblem
    sdr_bound: float
    randomized_objective: float

    @property
    def gap(self) -> float:
        if self.sdr_bound <= 0:
            return 0.0
        return self.randomized_objective / self.sdr_bound - 1.0


def default_eta(Ntx: int, Nrx: int, T: int, P: float, sigma_r2: float,
                margin: float = 2.0) -> float:
    """Sensing-MSE threshold `margin` times the MSE of an isotropic
    full-power beamformer, so the constraint is active but feasible."""
    return margin * (Nrx * sigma_r2 / T) * Ntx ** 2 / P


def effective_gram(A: np.ndarray, H: np.ndarray) -> np.ndarray:
    """H^H A A^H H, the equalized-channel gram the designs revolve around."""
    B = H.conj().T @ A
    gram = B @ B.conj().T
    return (gram + gram.conj().T) / 2.0


def zero_forcing(A: np.ndarray, H: np.ndarray,
                 cond_cap: float = 1e12) -> np.ndarray:
    """Zero-forcing transmit beamformer W = (H^H A A^H H)^{-1} H^H A.

    Downstream identity: W W^H = (H^H A A^H H)^{-1}, so the power this W
    spends is exactly the trace-inverse the conic program constrains.
    """
    gram = effective_gram(A, H)
    eig = np.linalg.eigvalsh(gram)
    if eig[0] <= 0 or eig[-1] > cond_cap * eig[0]:
        cond = eig[-1] / eig[0] if eig[0] > 0 else np.inf
        raise SingularEqualizerError(
            f"H^H A A^H H condition {cond:.3e} exceeds cap {cond_cap:.0e}"
        )
    return np.linalg.solve(gram, H.conj().T @ A)


def alpha_star(cfg: SystemConfig, m: int) -> float:
    """Smallest radar power scale meeting sensor m's sensing threshold with
    an orthonormal-row beamformer: Ntx Nrx sigma_r2 / (T eta_m)."""
    return cfg.Ntx * cfg.Nrx * cfg.sigma_r2 / (cfg.T * cfg.eta[m])


def radar_beamformer(cfg: SystemConfig, m: int) -> np.ndarray:
    """F_m = sqrt(alpha*_m) D with D the first Ntx rows of the K-point
    unitary DFT matrix (deterministic, exactly row-orthonormal)."""
    if cfg.K < cfg.Ntx:
        raise DimensionMismatchError(
            f"radar beamformer needs K >= Ntx for orthonormal rows, got K={cfg.K}, Ntx={cfg.Ntx}"
        )
    k = np.arange(cfg.K)
    p = np.arange(cfg.Ntx)[:, None]
    D = np.exp(-2j * np.pi * p * k / cfg.K) / np.sqrt(cfg.K)
    return np.sqrt(alpha_star(cfg, m)) * D


def _schur_lift_constraints(block_name: str, Ahat_name: str, He: np.ndarray,
                            budget: float, tag: str) -> tuple:
    """Constraints tying a Schur block S = [[U, I], [I, He^T Ahat He]] (all in
    the real embedding) to the Ahat variable, plus tr(U) <= 2*budget.

    Returns (block, constraint list). S and U are generic symmetric; the
    feasibility of tr((H^H Ahat H)^{-1}) <= budget is preserved exactly.
    """
    two_n = He.shape[1]
    size = 2 * two_n
    cons = []
    # top-right block pinned to the identity
    for pq in range(two_n * two_n):
        p, qc = divmod(pq, two_n)
        C = np.zeros((size, size))
        C[p, two_n + qc] = C[two_n + qc, p] = 0.5
        cons.append(LinearConstraint(
            coeffs={block_name: C}, relation="==",
            bound=1.0 if p == qc else 0.0,
            label=f"{tag}:eye[{p},{qc}]"))
    # bottom-right block equals the embedded equalized gram
    for q in range(two_n):
        for p in range(q + 1):
            C_s = np.zeros((size, size))
            if p == q:
                C_s[two_n + p, two_n + p] = 1.0
                C_a = -np.outer(He[:, p], He[:, p])
            else:
                C_s[two_n + p, two_n + q] = C_s[two_n + q, two_n + p] = 0.5
                C_a = -(np.outer(He[:, p], He[:, q]) + np.outer(He[:, q], He[:, p])) / 2.0
            cons.append(LinearConstraint(
                coeffs={block_name: C_s, Ahat_name: C_a}, relation="==",
                bound=0.0, label=f"{tag}:gram[{p},{q}]"))
    # tr(U) <= 2 * budget (embedded traces double)
    C_tr = np.zeros((size, size))
    C_tr[np.arange(two_n), np.arange(two_n)] = 1.0
    cons.append(LinearConstraint(coeffs={block_name: C_tr}, relation="<=",
                                 bound=2.0 * budget, label=f"{tag}:power"))
    return ConicBlock(block_name, size), cons


def build_sdp_shared(cfg: SystemConfig, channels: ChannelSet) -> ConicProblem:
    """Relaxed aggregation-matrix program for the shared scheme.

    Minimize sigma_c2 tr(Ahat) over Hermitian PSD Ahat subject to, per sensor,
    a sensing trace bound tr(H^H Ahat H) <= T eta / (Nrx sigma_r2) and the
    Schur-lifted power bound tr((H^H Ahat H)^{-1}) <= P. All blocks are the
    real embeddings, with trace bounds doubled accordingly.
    """
    model.validate_config(cfg)
    if cfg.scheme != "shared":
        raise DimensionMismatchError("build_sdp_shared needs a shared-scheme config")
    na2 = 2 * cfg.Na
    bounds = [cfg.T * cfg.eta[m] / (cfg.Nrx * cfg.sigma_r2) for m in range(cfg.M)]
    # pose the program in Ahat/gamma variables so the equalized gram inside
    # each Schur block sits at O(1) at the power-active optimum (raw bounds
    # can be 6+ orders apart at realistic noise powers, stalling the solver)
    gamma = cfg.Ntx / cfg.P
    blocks = [ConicBlock("Ahat", na2)]
    constraints = []
    for m in range(cfg.M):
        He = embed_hermitian(channels.H[m])
        constraints.append(LinearConstraint(
            coeffs={"Ahat": He @ He.T}, relation="<=",
            bound=2.0 * bounds[m] / gamma, label=f"sensing[{m}]"))
        blk, cons = _schur_lift_constraints(f"schur{m}", "Ahat", He,
                                            gamma * cfg.P, f"schur{m}")
        blocks.append(blk)
        constraints.extend(cons)
    return ConicProblem(
        blocks=blocks,
        objective={"Ahat": cfg.sigma_c2 * np.eye(na2)},
        constraints=constraints,
        provenance="shared-relaxation",
        objective_scale=0.5 * gamma,
        primary_block="Ahat",
        primary_complex_dim=cfg.Na,
        primary_scale=gamma,
    )


def build_sdp_separated(cfg: SystemConfig, channels: ChannelSet) -> ConicProblem:
    """Relaxed aggregation-matrix program for the separated scheme.

    Minimize sum_m alpha*_m tr(R^H Ahat R) + sigma_c2 tr(Ahat) subject to the
    per-sensor Schur-lifted bound tr((H^H Ahat H)^{-1}) <= P - alpha*_m.
    """
    model.validate_config(cfg)
    if cfg.scheme != "separated":
        raise DimensionMismatchError("build_sdp_separated needs a separated-scheme config")
    na2 = 2 * cfg.Na
    alphas = [alpha_star(cfg, m) for m in range(cfg.M)]
    for m, a_star in enumerate(alphas):
        if a_star >= cfg.P:
            raise RadarPowerError(
                f"alpha*_{m}={a_star:.6g} exceeds the power budget P={cfg.P:.6g}")
    # rescaled variables Ahat/gamma put the equalized grams at O(1)
    gamma = cfg.Nc / min(cfg.P - a for a in alphas)
    obj = cfg.sigma_c2 * np.eye(na2)
    blocks = [ConicBlock("Ahat", na2)]
    constraints = []
    for m in range(cfg.M):
        # eps(R R^H) = Re Re^T; the doubled embedded trace is undone by
        # objective_scale, same as the noise term.
        Re = embed_hermitian(channels.R[m])
        obj = obj + alphas[m] * (Re @ Re.T)
        He = embed_hermitian(channels.H[m])
        blk, cons = _schur_lift_constraints(f"schur{m}", "Ahat", He,
                                            gamma * (cfg.P - alphas[m]), f"schur{m}")
        blocks.append(blk)
        constraints.extend(cons)
    return ConicProblem(
        blocks=blocks,
        objective={"Ahat": obj},
        constraints=constraints,
        provenance="separated-relaxation",
        objective_scale=0.5 * gamma,
        primary_block="Ahat",
        primary_complex_dim=cfg.Na,
        primary_scale=gamma,
    )


def _feasible_scale(cfg: SystemConfig, channels: ChannelSet, A: np.ndarray,
                    cond_cap: float = 1e12):
    """Feasible scaling for t in A <- t A. Returns None if A cannot be made
    feasible by scaling, allowing the documented relative constraint slack
    (conic solutions sit on constraint boundaries, so exact-factor candidates
    land on the interval edge up to solver tolerance)."""
    tr_inv = np.empty(cfg.M)
    tr_fwd = np.empty(cfg.M)
    for m in range(cfg.M):
        gram = effective_gram(A, channels.H[m])
        eig = np.linalg.eigvalsh(gram)
        if eig[0] <= 0 or eig[-1] / eig[0] > cond_cap:
            return None
        tr_inv[m] = np.sum(1.0 / eig)
        tr_fwd[m] = np.sum(eig)
    if cfg.scheme == "shared":
        t2_lo = max(tr_inv[m] / cfg.P for m in range(cfg.M))
        bounds = [cfg.T * cfg.eta[m] / (cfg.Nrx * cfg.sigma_r2) for m in range(cfg.M)]
        t2_hi = min(bounds[m] / tr_fwd[m] for m in range(cfg.M))
        if t2_lo > t2_hi * (1.0 + POWER_SLACK):
            return None
        if t2_lo > t2_hi:
            # boundary case: split the <= slack between the two families
            return np.sqrt(0.5 * (t2_lo + t2_hi))
    else:
        budgets = [cfg.P - alpha_star(cfg, m) * cfg.Ntx for m in range(cfg.M)]
        if min(budgets) <= 0:
            return None
        t2_lo = max(tr_inv[m] / budgets[m] for m in range(cfg.M))
    return np.sqrt(t2_lo)


def _selection_objective(cfg: SystemConfig, channels: ChannelSet, A: np.ndarray) -> float:
    """Candidate-ranking objective: the aggregation-side computation error
    with zero-forcing transmitters (radar-leak plus noise terms)."""
    obj = cfg.sigma_c2 * float(np.linalg.norm(A) ** 2)
    if cfg.scheme == "separated":
        for m in range(cfg.M):
            a_star = alpha_star(cfg, m)
            obj += a_star * float(np.linalg.norm(channels.R[m].conj().T @ A) ** 2)
    return obj


def gaussian_randomization(Ahat_star: np.ndarray, cfg: SystemConfig,
                           channels: ChannelSet, n_samples: int,
                           seed: int) -> np.ndarray:
    """Extract a rank-K aggregation beamformer from the relaxed optimum.

    Candidate 0 is the exact top-K eigenfactor (optimal whenever the relaxed
    solution already has rank <= K); the rest are Gaussian resamplings
    A_n = V Sigma^{1/2} Z_n / sqrt(K). Each candidate is scaled by the
    smallest feasible t (scaling moves both constraint families
    monotonically), infeasible samples are discarded, and the feasible
    candidate with the smallest selection objective wins.
    """
    Ahat = (np.asarray(Ahat_star, dtype=complex) + np.asarray(Ahat_star).conj().T) / 2.0
    w, V = np.linalg.eigh(Ahat)
    w = np.clip(w, 0.0, None)
    order = np.argsort(w)[::-1]
    w, V = w[order], V[:, order]
    root = V * np.sqrt(w)[None, :]

    candidates = [root[:, :cfg.K]]
    rng = model.substream(seed, "randomization")
    for _ in range(n_samples):
        Z = model.complex_gaussian(rng, (cfg.Na, cfg.K))
        candidates.append(root @ Z / np.sqrt(cfg.K))

    best = None
    best_obj = np.inf
    for A in candidates:
        t = _feasible_scale(cfg, channels, A)
        if t is None:
            continue
        scaled = t * A
        obj = _selection_objective(cfg, channels, scaled)
        if obj < best_obj:
            best, best_obj = scaled, obj
    if best is None:
        raise NoFeasibleSampleError(
            f"no feasible candidate among {len(candidates)} samples")
    return best


def antenna_selection_baseline(cfg: SystemConfig, channels: ChannelSet,
                               reference_norm: float) -> BeamformerSet:
    """Baseline: pick the K AP antennas with the largest sum-channel row
    gains, scale the 0/1 selection matrix to the reference norm, then
    channel-inversion (zero-forcing) precoding with a per-sensor power clip."""
    if cfg.Na < cfg.K:
        raise DimensionMismatchError(f"antenna selection needs Na >= K, got {cfg.Na} < {cfg.K}")
    H_sum = np.sum(channels.H, axis=0)
    gains = np.linalg.norm(H_sum, axis=1)
    top = np.argsort(-gains, kind="stable")[:cfg.K]
    A = np.zeros((cfg.Na, cfg.K), dtype=complex)
    A[top, np.arange(cfg.K)] = 1.0
    A *= np.sqrt(reference_norm / cfg.K)

    if cfg.scheme == "separated":
        alphas = [alpha_star(cfg, m) for m in range(cfg.M)]
        F = [radar_beamformer(cfg, m) for m in range(cfg.M)]
        budgets = [cfg.P - a * cfg.Ntx for a, _ in zip(alphas, F)]
        if min(budgets) <= 0:
            raise RadarPowerError("radar power alone exhausts the per-sensor budget")
    else:
        alphas, F = None, None
        budgets = [cfg.P] * cfg.M

    W = []
    for m in range(cfg.M):
        Wm = zero_forcing(A, channels.H[m])
        used = float(np.linalg.norm(Wm) ** 2)
        if used > budgets[m]:
            Wm = Wm * np.sqrt(budgets[m] / used)
        W.append(Wm)
    return BeamformerSet(A=A, W=W, F=F, alpha=alphas)


def _build_problem(cfg: SystemConfig, channels: ChannelSet) -> ConicProblem:
    if cfg.scheme == "shared":
        return build_sdp_shared(cfg, channels)
    return build_sdp_separated(cfg, channels)


# power-budget tightening schedule for feasibility restoration: when the
# relaxed optimum has rank > K and rides both constraint families, every
# rank-K candidate inherits an empty scaling interval; re-solving with a
# tighter budget hands the candidates slack under the original constraints.
_TIGHTEN_STEPS = (0.1, 0.3, 1.0)


def design(cfg: SystemConfig, channels: ChannelSet, n_samples: int = 50,
           seed: int = 0, tol: float = 1e-9) -> DesignResult:
    """End-to-end beamformer design for either scheme: build the relaxed
    program, solve it, randomize to rank K, then zero-force per sensor.

    If no randomized candidate can be scaled into feasibility, the program is
    re-solved with a tightened power budget (the candidates are then checked
    against the original constraints, where the tightening is pure slack).
    """
    model.validate_config(cfg)
    if cfg.scheme == "separated":
        for m in range(cfg.M):
            if alpha_star(cfg, m) * cfg.Ntx >= cfg.P:
                raise RadarPowerError(
                    f"radar power alpha*_{m} * Ntx = "
                    f"{alpha_star(cfg, m) * cfg.Ntx:.6g} >= P = {cfg.P:.6g}")
    problem = _build_problem(cfg, channels)
    solution = conic.solve_conic(problem, tol=tol)
    if solution.status == "infeasible":
        raise InfeasibleError(f"{problem.provenance} program is infeasible")
    if solution.status != "optimal":
        raise SolverFailureError(
            f"{problem.provenance} solve ended with status {solution.solver_status} "
            f"(violation {solution.max_constraint_violation:.3e})")

    radar_floor = (max(alpha_star(cfg, m) for m in range(cfg.M)) * cfg.Ntx
                   if cfg.scheme == "separated" else 0.0)
    A = None
    last_exc = None
    for delta in (0.0,) + _TIGHTEN_STEPS:
        if delta == 0.0:
            ahat = solution.Ahat
        else:
            tight = cfg.replace(P=radar_floor + (cfg.P - radar_floor) / (1.0 + delta))
            tight_sol = conic.solve_conic(_build_problem(tight, channels), tol=tol)
            if tight_sol.status != "optimal":
                continue
            ahat = tight_sol.Ahat
        try:
            A = gaussian_randomization(ahat, cfg, channels, n_samples, seed)
            break
        except NoFeasibleSampleError as exc:
            last_exc = exc
    if A is None:
        raise last_exc

    W = [zero_forcing(A, channels.H[m]) for m in range(cfg.M)]
    if cfg.scheme == "separated":
        alphas = [alpha_star(cfg, m) for m in range(cfg.M)]
        F = [radar_beamformer(cfg, m) for m in range(cfg.M)]
        bf = BeamformerSet(A=A, W=W, F=F, alpha=alphas)
    else:
        bf = BeamformerSet(A=A, W=W)
    return DesignResult(
        beamformers=bf,
        solution=solution,
        problem=problem,
        sdr_bound=solution.objective_value,
        randomized_objective=_selection_objective(cfg, channels, A),
    )


def power_used(bf: BeamformerSet, m: int) -> float:
    """tr(W W^H) plus tr(F F^H) where present, for the power invariant."""
    used = float(np.linalg.norm(bf.W[m]) ** 2)
    if bf.F is not None:
        used += float(np.linalg.norm(bf.F[m]) ** 2)
    return used
