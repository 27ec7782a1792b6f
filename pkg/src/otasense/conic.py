"""Real symmetric PSD-cone programs and their solution.

A ConicProblem is a linear objective over a set of real symmetric matrix
variables, each constrained to the PSD cone, plus scalar linear (in)equality
constraints on those blocks. Complex Hermitian data enters through the
standard embedding

    eps(Z) = [[Re Z, -Im Z], [Im Z, Re Z]],

which preserves positive semidefiniteness, products, and conjugate
transposition, and doubles traces. Builders therefore double every trace
bound in the embedded program; recovery halves objective values and maps the
primary block back to a Hermitian matrix.

Solving is delegated to the Clarabel interior-point solver in its native
scaled-triangle form: the decision vector stacks svec(X_b) per block, where
svec takes the upper triangle column by column with off-diagonal entries
scaled by sqrt(2), so that <C, X> = svec(C) . svec(X).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import clarabel

_SQRT2 = np.sqrt(2.0)

# cache: n -> (row indices, col indices, scale) of the column-major upper triangle
_TRI_CACHE: dict = {}


def tri_dim(n: int) -> int:
    return n * (n + 1) // 2


def _tri_indices(n: int):
    cached = _TRI_CACHE.get(n)
    if cached is None:
        cols = np.repeat(np.arange(n), np.arange(1, n + 1))
        rows = np.concatenate([np.arange(j + 1) for j in range(n)])
        scale = np.where(rows < cols, _SQRT2, 1.0)
        cached = (rows, cols, scale)
        _TRI_CACHE[n] = cached
    return cached


def svec(X: np.ndarray) -> np.ndarray:
    """Scaled upper-triangle vectorization of a real symmetric matrix."""
    n = X.shape[0]
    rows, cols, scale = _tri_indices(n)
    return np.asarray(X)[rows, cols] * scale


def smat(v: np.ndarray, n: int) -> np.ndarray:
    """Inverse of svec."""
    rows, cols, scale = _tri_indices(n)
    X = np.zeros((n, n))
    X[rows, cols] = v / scale
    X[cols, rows] = X[rows, cols]
    return X


def embed_hermitian(Z: np.ndarray) -> np.ndarray:
    """Real symmetric 2n x 2n embedding of a complex Hermitian (or general) matrix."""
    Z = np.asarray(Z, dtype=complex)
    return np.block([[Z.real, -Z.imag], [Z.imag, Z.real]])


def unembed_hermitian(X: np.ndarray) -> np.ndarray:
    """Recover the complex n x n matrix from a real 2n x 2n (near-)embedding.

    Averages over the embedding symmetry, so a generic symmetric solution that
    is only equivalent to an embedded one maps to the right Hermitian matrix.
    """
    n2 = X.shape[0]
    if n2 % 2:
        raise ValueError("embedded matrix must have even dimension")
    n = n2 // 2
    re = (X[:n, :n] + X[n:, n:]) / 2.0
    im = (X[n:, :n] - X[:n, n:]) / 2.0
    return re + 1j * im


@dataclass
class ConicBlock:
    """One real symmetric PSD matrix variable."""

    name: str
    size: int


@dataclass
class LinearConstraint:
    """sum_b <coeffs[b], X_b>  (relation)  bound, with symmetric coefficients."""

    coeffs: dict
    relation: str  # "<=" or "=="
    bound: float
    label: str = ""


@dataclass
class ConicProblem:
    """Linear-conic program over PSD blocks; see module docstring.

    Builders may pose the program in rescaled variables to balance constraint
    magnitudes; primary_scale maps the solved primary block back to natural
    units, and objective_scale maps the raw solver objective back to the
    complex-domain objective value.
    """

    blocks: list
    objective: dict
    constraints: list
    provenance: str = ""
    # complex-domain objective = objective_scale * raw embedded objective
    objective_scale: float = 1.0
    # block holding the embedded aggregation matrix, and its complex dimension
    primary_block: str = "Ahat"
    primary_complex_dim: int = 0
    # natural-units primary matrix = primary_scale * solved block
    primary_scale: float = 1.0

    def block_sizes(self) -> dict:
        return {b.name: b.size for b in self.blocks}


@dataclass
class ConicSolution:
    """Solver output mapped back to the complex domain."""

    Ahat: np.ndarray | None
    objective_value: float
    status: str  # "optimal" | "infeasible" | "max-iter"
    max_constraint_violation: float
    min_eigenvalue: float
    blocks: dict = field(default_factory=dict)
    iterations: int = 0
    solver_status: str = ""


def _assemble(problem: ConicProblem):
    """Stack the problem into Clarabel's (q, A, b, cones) form."""
    sizes = problem.block_sizes()
    offsets = {}
    off = 0
    for b in problem.blocks:
        offsets[b.name] = off
        off += tri_dim(b.size)
    nvar = off

    q = np.zeros(nvar)
    for name, C in problem.objective.items():
        o = offsets[name]
        q[o:o + tri_dim(sizes[name])] += svec(np.asarray(C, dtype=float))

    eq_idx = [i for i, c in enumerate(problem.constraints) if c.relation == "=="]
    le_idx = [i for i, c in enumerate(problem.constraints) if c.relation == "<="]
    order = eq_idx + le_idx

    rows, cols, vals = [], [], []
    b_vec = np.zeros(len(order))
    for r, ci in enumerate(order):
        con = problem.constraints[ci]
        # normalize each row by its bound so wildly loose constraints
        # (e.g. near-infinite thresholds) cannot dominate the equilibration
        scale = max(1.0, abs(con.bound))
        b_vec[r] = con.bound / scale
        for name, C in con.coeffs.items():
            o = offsets[name]
            v = svec(np.asarray(C, dtype=float)) / scale
            nz = np.nonzero(v)[0]
            rows.append(np.full(nz.size, r))
            cols.append(o + nz)
            vals.append(v[nz])
    n_lin = len(order)
    if n_lin:
        A_lin = sp.coo_matrix(
            (np.concatenate(vals) if vals else np.empty(0),
             (np.concatenate(rows) if rows else np.empty(0, dtype=int),
              np.concatenate(cols) if cols else np.empty(0, dtype=int))),
            shape=(n_lin, nvar),
        )
    else:
        A_lin = sp.coo_matrix((0, nvar))

    A = sp.vstack([A_lin, -sp.identity(nvar, format="coo")], format="csc")
    b_full = np.concatenate([b_vec, np.zeros(nvar)])

    cones = []
    if eq_idx:
        cones.append(clarabel.ZeroConeT(len(eq_idx)))
    if le_idx:
        cones.append(clarabel.NonnegativeConeT(len(le_idx)))
    for blk in problem.blocks:
        cones.append(clarabel.PSDTriangleConeT(blk.size))
    return q, A, b_full, cones, offsets


def evaluate_violation(problem: ConicProblem, block_values: dict) -> float:
    """Largest relative violation of the linear constraints at block_values."""
    worst = 0.0
    for con in problem.constraints:
        lhs = 0.0
        for name, C in con.coeffs.items():
            lhs += float(np.sum(np.asarray(C, dtype=float) * block_values[name]))
        scale = max(1.0, abs(con.bound))
        if con.relation == "==":
            worst = max(worst, abs(lhs - con.bound) / scale)
        else:
            worst = max(worst, (lhs - con.bound) / scale)
    return worst


def solve_conic(problem: ConicProblem, tol: float = 1e-9,
                max_iter: int = 200) -> ConicSolution:
    """Solve a ConicProblem with the Clarabel interior-point solver.

    Deterministic for fixed problem data. The objective vector is normalized
    to unit peak coefficient before the solve so termination tests are
    scale-free; the reported objective is un-normalized and mapped back to the
    complex domain via objective_scale. If the solver stalls just short of
    the requested tolerance it is retried once 100x looser; a run that still
    ends without a clean certificate reports status "max-iter" with its best
    iterate and violation.
    """
    q, A, b, cones, offsets = _assemble(problem)

    obj_norm = float(np.max(np.abs(q))) if q.size else 0.0
    q_solver = q / obj_norm if obj_norm > 0 else q
    P = sp.csc_matrix((q.size, q.size))

    result = None
    for attempt_tol in (tol, tol * 100):
        settings = clarabel.DefaultSettings()
        settings.verbose = False
        settings.max_iter = max_iter
        settings.tol_gap_rel = attempt_tol
        # the objective is normalized to unit peak coefficient, so an
        # absolute gap tolerance at tol is meaningful in any units
        settings.tol_gap_abs = attempt_tol
        settings.tol_feas = attempt_tol
        solver = clarabel.DefaultSolver(P, q_solver, A, b, cones, settings)
        result = solver.solve()
        if str(result.status) in ("Solved", "PrimalInfeasible", "DualInfeasible"):
            break

    status_name = str(result.status)
    if status_name in ("Solved", "AlmostSolved"):
        status = "optimal" if status_name == "Solved" else "max-iter"
    elif status_name in ("PrimalInfeasible", "AlmostPrimalInfeasible"):
        status = "infeasible"
    else:
        status = "max-iter"

    if status == "infeasible":
        return ConicSolution(Ahat=None, objective_value=np.nan, status="infeasible",
                             max_constraint_violation=np.inf, min_eigenvalue=np.nan,
                             iterations=result.iterations, solver_status=status_name)

    x = np.asarray(result.x)
    sizes = problem.block_sizes()
    block_values = {}
    for blk in problem.blocks:
        o = offsets[blk.name]
        block_values[blk.name] = smat(x[o:o + tri_dim(blk.size)], blk.size)

    raw_obj = float(q @ x)
    Ahat = None
    min_eig = np.nan
    if problem.primary_block in block_values:
        Ahat = problem.primary_scale * unembed_hermitian(block_values[problem.primary_block])
        Ahat = (Ahat + Ahat.conj().T) / 2.0
        min_eig = float(np.linalg.eigvalsh(Ahat)[0])

    return ConicSolution(
        Ahat=Ahat,
        objective_value=raw_obj * problem.objective_scale,
        status=status,
        max_constraint_violation=evaluate_violation(problem, block_values),
        min_eigenvalue=min_eig,
        blocks=block_values,
        iterations=result.iterations,
        solver_status=status_name,
    )


def export_conic(problem: ConicProblem) -> str:
    """Sparse block text export, for cross-checking with external solvers.

    Format (one record per line, '#' comments allowed):
        conic-problem v1
        provenance <tag>
        objective-scale <float>
        primary <block-name> <complex-dim> <variable-rescale>
        block <name> <size>                      # one per PSD variable
        obj <block> <i> <j> <value>              # upper-triangle entries
        con <index> <relation> <bound> <label>
        coef <index> <block> <i> <j> <value>

    Entries list the upper triangle (i <= j) of each symmetric coefficient;
    the implied matrix is symmetric. All indices are 0-based.
    """
    out = ["conic-problem v1",
           f"provenance {problem.provenance}",
           f"objective-scale {problem.objective_scale:.17g}",
           f"primary {problem.primary_block} {problem.primary_complex_dim} {problem.primary_scale:.17g}"]
    for blk in problem.blocks:
        out.append(f"block {blk.name} {blk.size}")
    for name, C in problem.objective.items():
        C = np.asarray(C, dtype=float)
        for i, j in zip(*np.triu_indices(C.shape[0])):
            if C[i, j] != 0.0:
                out.append(f"obj {name} {i} {j} {C[i, j]:.17g}")
    for idx, con in enumerate(problem.constraints):
        out.append(f"con {idx} {con.relation} {con.bound:.17g} {con.label}")
        for name, C in con.coeffs.items():
            C = np.asarray(C, dtype=float)
            for i, j in zip(*np.triu_indices(C.shape[0])):
                if C[i, j] != 0.0:
                    out.append(f"coef {idx} {name} {i} {j} {C[i, j]:.17g}")
    return "\n".join(out) + "\n"
