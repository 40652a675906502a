"""Infinite-horizon output-feedback LQR with state equality constraints.

Problem: minimize J = 1/2 int_0^inf (x'Qx + u'Ru) dt subject to
x' = Ax + Bu, y = Cx, D'x = 0, x(0) = x0, and recover a gain K with u = -Ky.

The dynamics are collocated in integral form, x(t_j) = A int_0^{t_j} x +
B int_0^{t_j} u + x(0), with the TG quadrature over [0, t_j]. Two
transcriptions are provided:

- TG-IS ("is"): the unknowns are modal TG coefficients a (n_x x (L_x+1)) and
  b (n_u x (L_u+1)); the system size grows linearly in n.
- TG-IPS ("ips"): the unknowns are nodal values at the t grid and at the
  auxiliary grid eta = E (x) t; the system size grows quadratically in n.

Both produce an equality-constrained convex QP, solved exactly through its
KKT system.
"""

import enum
import logging
import time
import warnings
from dataclasses import dataclass, field

import numpy as np
import polars as pl
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from tgspec import config
from tgspec.errors import (
    DimensionError,
    DomainError,
    InfeasibleConstraints,
    RankDeficientOutputs,
    SingularSystem,
    SizingError,
)
from tgspec.interpolation import transform_matrix
from tgspec.tgbasis import TGFamily, TGMap, build_grid, cost_weights, tg_eval_series

logger = logging.getLogger(__name__)

SYMMETRY_TOLERANCE = 1e-12
PSD_TOLERANCE = 1e-10
FEASIBILITY_TOLERANCE = 1e-6
KKT_ACCEPT_TOLERANCE = 1e-8
REGULARIZATION = 1e-10
GAIN_RANK_TOLERANCE = 1e-10


class Method(enum.Enum):
    IS = "is"
    IPS = "ips"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            raise DomainError(f"unknown method {value!r}, expected 'is' or 'ips'") from None


class InitialCondition(enum.Enum):
    # x(0) replaced by the modal value at t = 0, plus n_x rows fixing it to x0.
    # Only solvable when the state expansion has more terms than the grid has nodes.
    EXPLICIT = "explicit"
    # x0 kept as right-hand-side data of the dynamics rows
    DATA = "data"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            raise DomainError(f"unknown initial condition mode {value!r}") from None


class BenchmarkId(enum.Enum):
    DCS = "dcs"
    F16 = "f16"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            raise DomainError(f"unknown benchmark problem {value!r}, expected dcs or f16") from None


class Regime(enum.Enum):
    STRETCHING = "stretching"
    CONTRACTING = "contracting"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            raise DomainError(f"unknown regime {value!r}") from None


def _as_matrix(value, name, rows=None):
    arr = np.array(value, dtype=float)
    if arr.ndim == 1 and rows is not None and arr.size == rows:
        arr = arr.reshape(rows, 1)
    if arr.ndim != 2:
        raise DimensionError(f"{name} must be a matrix, got shape {arr.shape}")
    return arr


@dataclass(frozen=True, eq=False)
class IHOCProblem:
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    Q: np.ndarray
    R: np.ndarray
    x0: np.ndarray

    def __post_init__(self):
        n_x = np.shape(self.A)[0] if np.ndim(self.A) == 2 else None
        object.__setattr__(self, "A", _as_matrix(self.A, "A"))
        object.__setattr__(self, "B", _as_matrix(self.B, "B", rows=n_x))
        object.__setattr__(self, "C", _as_matrix(self.C, "C"))
        D = np.zeros((self.A.shape[0], 0)) if self.D is None else self.D
        if np.size(D) == 0:
            D = np.zeros((self.A.shape[0], 0))
        object.__setattr__(self, "D", _as_matrix(D, "D", rows=n_x))
        object.__setattr__(self, "Q", _as_matrix(self.Q, "Q"))
        object.__setattr__(self, "R", _as_matrix(self.R, "R"))
        object.__setattr__(self, "x0", np.array(self.x0, dtype=float).ravel())
        validate_problem(self)
        for arr in (self.A, self.B, self.C, self.D, self.Q, self.R, self.x0):
            arr.setflags(write=False)

    @property
    def n_x(self):
        return self.A.shape[0]

    @property
    def n_u(self):
        return self.B.shape[1]

    @property
    def n_y(self):
        return self.C.shape[0]

    @property
    def c_1(self):
        return self.D.shape[1]

    def with_initial_state(self, x0):
        return IHOCProblem(self.A, self.B, self.C, self.D, self.Q, self.R, x0)


def _check_sym_psd(M, name):
    if np.max(np.abs(M - M.T), initial=0.0) > SYMMETRY_TOLERANCE:
        raise DimensionError(f"{name} must be symmetric")
    if M.size and np.min(np.linalg.eigvalsh(M)) < -PSD_TOLERANCE:
        raise DimensionError(f"{name} must be positive semi-definite")


def validate_problem(problem):
    n_x = problem.A.shape[0]
    expected = {
        "A": (n_x, n_x),
        "B": (n_x, problem.B.shape[1]),
        "C": (problem.C.shape[0], n_x),
        "D": (n_x, problem.D.shape[1]),
        "Q": (n_x, n_x),
        "R": (problem.B.shape[1], problem.B.shape[1]),
    }
    for name, shape in expected.items():
        if getattr(problem, name).shape != shape:
            raise DimensionError(
                f"{name} has shape {getattr(problem, name).shape}, expected {shape}"
            )
    if problem.x0.shape != (n_x,):
        raise DimensionError(f"x0 has {problem.x0.size} entries, expected {n_x}")
    _check_sym_psd(problem.Q, "Q")
    _check_sym_psd(problem.R, "R")
    return problem


def make_benchmark_problem(id):
    id = BenchmarkId.parse(id)
    if id is BenchmarkId.DCS:
        # Divert control system: chamber pressure and four nozzle throat areas
        a = -33985.7
        A = np.array(
            [
                [-964.8, a, a, a, a],
                [0.0, -400.0, 0.0, 0.0, 0.0],
                [0.0, 0.0, -400.0, 0.0, 0.0],
                [0.0, 0.0, 0.0, -400.0, 0.0],
                [0.0, 0.0, 0.0, 0.0, -400.0],
            ]
        )
        B = np.vstack([np.zeros((1, 4)), 400.0 * np.eye(4)])
        C = np.array([[1.0, 0.0, 0.0, 0.0, 0.0]])
        D = np.array([[0.0], [1.0], [1.0], [1.0], [1.0]])
        return IHOCProblem(A, B, C, D, np.eye(5), np.eye(4), [200.0, 10.0, -10.0, 5.0, -5.0])

    # F-16 lateral dynamics with aileron-rudder interconnect
    A = np.array(
        [
            [-0.3220, 0.0640, 0.0364, -0.9917, 0.0003, 0.0008, 0.0],
            [0.0, 0.0, 1.0, 0.0037, 0.0, 0.0, 0.0],
            [-30.6492, 0.0, -3.6784, 0.6646, -0.7333, 0.1315, 0.0],
            [8.5396, 0.0, -0.0254, -0.4764, -0.0319, -0.0620, 0.0],
            [0.0, 0.0, 0.0, 0.0, -20.2, 0.0, 0.0],
            [0.0, 0.0, 0.0, 0.0, 0.0, -20.2, 0.0],
            [0.0, 0.0, 0.0, 57.2958, 0.0, 0.0, -1.0],
        ]
    )
    B = np.zeros((7, 2))
    B[4, 0] = 20.2
    B[5, 1] = 20.2
    C = np.array(
        [
            [0.0, 0.0, 0.0, 57.2958, 0.0, 0.0, -1.0],
            [0.0, 0.0, 57.2958, 0.0, 0.0, 0.0, 0.0],
            [57.2958, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
            [0.0, 57.2958, 0.0, 0.0, 0.0, 0.0, 0.0],
        ]
    )
    D = np.array([[0.0], [0.0], [0.0], [0.0], [12.0], [-1.0], [0.0]])
    Q = np.diag([50.0, 100.0, 100.0, 50.0, 0.0, 0.0, 1.0])
    R = 0.1 * np.eye(2)
    x0 = np.zeros(7)
    x0[0] = 0.5
    return IHOCProblem(A, B, C, D, Q, R, x0)


@dataclass(frozen=True)
class ISAssembly:
    """TG values needed by the modal transcription.

    eta holds E_k t_j at flat index k (n+1) + j; G_at_eta_x / G_at_eta_u share
    that row order. M_x / M_u map modal coefficients to the quadrature of the
    expansion over [0, t_j]: M[j, l] = t_j sum_k P_k G_l(E_k t_j).
    """

    grid: object
    L_x: int
    L_u: int
    eta: np.ndarray
    G_at_t: np.ndarray
    G_at_t_u: np.ndarray
    G_at_eta_x: np.ndarray
    G_at_eta_u: np.ndarray
    M_x: np.ndarray
    M_u: np.ndarray
    eta_order: str = "k*(n+1)+j -> E_k*t_j"


def eta_points(grid):
    return np.outer(grid.E, grid.t_nodes).ravel()


def _integration_operator(grid, G_at_eta):
    N = grid.n + 1
    G3 = G_at_eta.reshape(N, N, -1)
    return grid.t_nodes[:, None] * np.einsum("k,kjl->jl", grid.P, G3)


def assemble_modal_operators(grid, L_x, L_u):
    if L_x < 0 or L_u < 0:
        raise DimensionError("modal truncation degrees must be nonnegative")
    eta = eta_points(grid)
    G_t = tg_eval_series(grid.map, grid.alpha, L_x, grid.t_nodes).T
    G_t_u = tg_eval_series(grid.map, grid.alpha, L_u, grid.t_nodes).T
    G_eta_x = tg_eval_series(grid.map, grid.alpha, L_x, eta).T
    G_eta_u = tg_eval_series(grid.map, grid.alpha, L_u, eta).T
    return ISAssembly(
        grid=grid,
        L_x=L_x,
        L_u=L_u,
        eta=eta,
        G_at_t=G_t,
        G_at_t_u=G_t_u,
        G_at_eta_x=G_eta_x,
        G_at_eta_u=G_eta_u,
        M_x=_integration_operator(grid, G_eta_x),
        M_u=_integration_operator(grid, G_eta_u),
    )


@dataclass(frozen=True)
class QPSystem:
    """min 1/2 z'Hz subject to Aeq z = beq.

    variable_layout maps block names to slices of z. For "is": "a" holds
    a_{1,0..L_x}, ..., a_{n_x,0..L_x} then "b" holds the control coefficients.
    For "ips": "x_t", "x_eta", "u_t", "u_eta" hold nodal values, state-major.
    row_blocks maps "dynamics", "d_constraint", "consistency" (ips only) and
    "initial" (explicit mode only) to row slices of Aeq.
    """

    H: object
    Aeq: object
    beq: np.ndarray
    method: Method
    problem: IHOCProblem
    grid: object
    L_x: int
    L_u: int
    initial_condition: InitialCondition
    variable_layout: dict = field(default_factory=dict)
    row_blocks: dict = field(default_factory=dict)

    @property
    def d(self):
        return self.H.shape[0]

    @property
    def m(self):
        return self.Aeq.shape[0]


def _blocks(sizes):
    out, start = {}, 0
    for name, size in sizes:
        out[name] = slice(start, start + size)
        start += size
    return out


def _check_compatible(problem, grid):
    if not isinstance(problem, IHOCProblem):
        raise DimensionError("problem must be an IHOCProblem")
    if grid.n < 0:
        raise DimensionError("grid must have at least one node")


def assemble_is(problem, grid, L_x=None, L_u=None, initial_condition=InitialCondition.DATA):
    """Modal (TG-IS) transcription into a dense equality-constrained QP."""
    _check_compatible(problem, grid)
    initial_condition = InitialCondition.parse(initial_condition)
    N = grid.n + 1
    L_x = N if L_x is None else int(L_x)
    L_u = N if L_u is None else int(L_u)
    if initial_condition is InitialCondition.EXPLICIT and L_x <= grid.n:
        raise DomainError(
            f"explicit initial-condition rows need L_x > n (got L_x={L_x}, n={grid.n}); "
            "use initial_condition='data'"
        )
    ops = assemble_modal_operators(grid, L_x, L_u)
    n_x, n_u, c_1 = problem.n_x, problem.n_u, problem.c_1
    I_x = np.eye(n_x)
    signs = (-1.0) ** np.arange(L_x + 1)

    dyn_a = np.kron(I_x, ops.G_at_t) - np.kron(problem.A, ops.M_x)
    if initial_condition is InitialCondition.EXPLICIT:
        dyn_a -= np.kron(I_x, np.outer(np.ones(N), signs))
        dyn_rhs = np.zeros(N * n_x)
    else:
        dyn_rhs = np.kron(problem.x0, np.ones(N))
    dyn_b = -np.kron(problem.B, ops.M_u)

    d_a = np.kron(problem.D.T, ops.G_at_t)
    d_b = np.zeros((N * c_1, n_u * (L_u + 1)))

    rows_a, rows_b, rhs = [dyn_a, d_a], [dyn_b, d_b], [dyn_rhs, np.zeros(N * c_1)]
    row_sizes = [("dynamics", N * n_x), ("d_constraint", N * c_1)]
    if initial_condition is InitialCondition.EXPLICIT:
        rows_a.append(np.kron(I_x, signs[None, :]))
        rows_b.append(np.zeros((n_x, n_u * (L_u + 1))))
        rhs.append(problem.x0.copy())
        row_sizes.append(("initial", n_x))
    Aeq = np.hstack([np.vstack(rows_a), np.vstack(rows_b)])
    beq = np.concatenate(rhs)

    W = cost_weights(grid)
    H_a = np.kron(problem.Q, ops.G_at_t.T @ (W[:, None] * ops.G_at_t))
    H_b = np.kron(problem.R, ops.G_at_t_u.T @ (W[:, None] * ops.G_at_t_u))
    H = scipy.linalg.block_diag(H_a, H_b)
    H = 0.5 * (H + H.T)

    layout = _blocks([("a", n_x * (L_x + 1)), ("b", n_u * (L_u + 1))])
    logger.info(
        "assembled TG-IS system: d=%d unknowns, m=%d constraints (n=%d, L_x=%d, L_u=%d)",
        H.shape[0], Aeq.shape[0], grid.n, L_x, L_u,
    )
    return QPSystem(
        H=H,
        Aeq=Aeq,
        beq=beq,
        method=Method.IS,
        problem=problem,
        grid=grid,
        L_x=L_x,
        L_u=L_u,
        initial_condition=initial_condition,
        variable_layout=layout,
        row_blocks=_blocks(row_sizes),
    )


def assemble_ips(problem, grid, initial_condition=InitialCondition.DATA, max_n=None):
    """Nodal (TG-IPS) transcription into a sparse equality-constrained QP.

    The eta-values are tied to the t-values through the degree-n TG interpolant
    of the t-node samples. x0 stays on the right-hand side of the dynamics rows;
    pinning the interpolant at t = 0 as well overdetermines the nodal system.
    """
    _check_compatible(problem, grid)
    initial_condition = InitialCondition.parse(initial_condition)
    if initial_condition is InitialCondition.EXPLICIT:
        raise DomainError("TG-IPS takes x0 as data; explicit initial-condition rows are for TG-IS")
    max_n = config.get_ips_max_n() if max_n is None else max_n
    if grid.n > max_n:
        raise SizingError(
            f"TG-IPS with n={grid.n} needs O(n^4) storage; the limit is n={max_n}, use method 'is'"
        )
    N = grid.n + 1
    N2 = N * N
    n_x, n_u, c_1 = problem.n_x, problem.n_u, problem.c_1

    T = transform_matrix(grid)
    interp = tg_eval_series(grid.map, grid.alpha, grid.n, eta_points(grid)).T @ T
    quad = sp.diags(grid.t_nodes) @ sp.kron(sp.csr_matrix(grid.P[None, :]), sp.identity(N))

    layout = _blocks(
        [("x_t", n_x * N), ("x_eta", n_x * N2), ("u_t", n_u * N), ("u_eta", n_u * N2)]
    )
    I_x, I_u = sp.identity(n_x), sp.identity(n_u)

    def row(blocks):
        return [blocks.get(name) for name in ("x_t", "x_eta", "u_t", "u_eta")]

    width = {"x_t": n_x * N, "x_eta": n_x * N2, "u_t": n_u * N, "u_eta": n_u * N2}

    dyn_rhs = np.kron(problem.x0, np.ones(N))
    block_rows = [
        row(
            {
                "x_t": sp.identity(n_x * N),
                "x_eta": -sp.kron(sp.csr_matrix(problem.A), quad),
                "u_eta": -sp.kron(sp.csr_matrix(problem.B), quad),
            }
        ),
        row({"x_t": sp.kron(sp.csr_matrix(problem.D.T), sp.identity(N))}),
        row({"x_t": -sp.kron(I_x, sp.csr_matrix(interp)), "x_eta": sp.identity(n_x * N2)}),
        row({"u_t": -sp.kron(I_u, sp.csr_matrix(interp)), "u_eta": sp.identity(n_u * N2)}),
    ]
    rhs = [dyn_rhs, np.zeros(N * c_1), np.zeros(n_x * N2), np.zeros(n_u * N2)]
    row_sizes = [
        ("dynamics", n_x * N),
        ("d_constraint", c_1 * N),
        ("consistency", (n_x + n_u) * N2),
    ]

    # Zero-height D rows are dropped by bmat, so fill empty cells explicitly
    names = ("x_t", "x_eta", "u_t", "u_eta")
    filled = []
    for cells, b in zip(block_rows, rhs):
        if b.size == 0:
            continue
        filled.append(
            [
                cell if cell is not None else sp.csr_matrix((b.size, width[name]))
                for cell, name in zip(cells, names)
            ]
        )
    Aeq = sp.bmat(filled, format="csr")
    beq = np.concatenate(rhs)

    W = sp.diags(cost_weights(grid))
    H = sp.block_diag(
        [
            sp.kron(sp.csr_matrix(problem.Q), W),
            sp.csr_matrix((n_x * N2, n_x * N2)),
            sp.kron(sp.csr_matrix(problem.R), W),
            sp.csr_matrix((n_u * N2, n_u * N2)),
        ],
        format="csr",
    )
    logger.info(
        "assembled TG-IPS system: d=%d unknowns, m=%d constraints, nnz=%d (n=%d)",
        H.shape[0], Aeq.shape[0], Aeq.nnz, grid.n,
    )
    return QPSystem(
        H=H,
        Aeq=Aeq,
        beq=beq,
        method=Method.IPS,
        problem=problem,
        grid=grid,
        L_x=grid.n,
        L_u=grid.n,
        initial_condition=initial_condition,
        variable_layout=layout,
        row_blocks=_blocks(row_sizes),
    )


@dataclass(frozen=True)
class KKTSolution:
    solution: np.ndarray
    multipliers: np.ndarray
    kkt_residual: float
    constraint_residual: float
    regularized: bool


def _max_abs(M):
    if sp.issparse(M):
        return float(abs(M).max()) if M.nnz else 0.0
    return float(np.max(np.abs(M), initial=0.0))


def _kkt_matrix(H, Aeq, shift):
    if sp.issparse(H) or sp.issparse(Aeq):
        H = sp.csr_matrix(H)
        Aeq = sp.csr_matrix(Aeq)
        if shift:
            H = H + shift * sp.identity(H.shape[0])
        return sp.bmat([[H, Aeq.T], [Aeq, None]], format="csc")
    m = Aeq.shape[0]
    H = H + shift * np.eye(H.shape[0]) if shift else H
    return np.block([[H, Aeq.T], [Aeq, np.zeros((m, m))]])


def _direct_solve(K, rhs):
    # Returns None when the factorization is singular or badly conditioned
    with warnings.catch_warnings():
        warnings.simplefilter("error", scipy.linalg.LinAlgWarning)
        warnings.simplefilter("error", spla.MatrixRankWarning)
        try:
            if sp.issparse(K):
                sol = spla.spsolve(K, rhs)
            else:
                sol = scipy.linalg.solve(K, rhs, assume_a="sym")
        except (
            np.linalg.LinAlgError,
            RuntimeError,
            scipy.linalg.LinAlgWarning,
            spla.MatrixRankWarning,
        ) as exc:
            logger.debug("direct KKT solve failed: %s", exc)
            return None
    return sol if np.all(np.isfinite(sol)) else None


def _least_squares_solve(K, rhs):
    if sp.issparse(K):
        return spla.lsqr(K, rhs, atol=1e-14, btol=1e-14, iter_lim=20 * K.shape[0])[0]
    return scipy.linalg.lstsq(K, rhs)[0]


def solve_kkt(qp):
    """Solve [H Aeq'; Aeq 0][z; mu] = [0; beq] for the QP optimum."""
    H, Aeq, beq = qp.H, qp.Aeq, np.asarray(qp.beq, dtype=float)
    d, m = H.shape[0], Aeq.shape[0]
    rhs = np.concatenate([np.zeros(d), beq])
    K = _kkt_matrix(H, Aeq, 0.0)
    rhs_scale = max(1.0, float(np.max(np.abs(rhs), initial=0.0)))

    def residual(sol):
        return float(np.max(np.abs(K @ sol - rhs), initial=0.0)) / rhs_scale

    regularized = False
    sol = _direct_solve(K, rhs)
    if sol is None or residual(sol) > KKT_ACCEPT_TOLERANCE:
        shift = REGULARIZATION * max(1.0, _max_abs(H))
        logger.warning("KKT matrix is rank-deficient, regularizing H with eps=%.3e", shift)
        regularized = True
        K_reg = _kkt_matrix(H, Aeq, shift)
        sol = _direct_solve(K_reg, rhs)
        if sol is None:
            logger.warning("regularized KKT factorization failed, using least squares")
            sol = _least_squares_solve(K_reg, rhs)
    if sol is None or not np.all(np.isfinite(sol)):
        raise SingularSystem("KKT system could not be solved even after regularization")

    z, mu = sol[:d], sol[d:]
    constraint_residual = float(np.max(np.abs(Aeq @ z - beq), initial=0.0))
    beq_scale = max(1.0, float(np.max(np.abs(beq), initial=0.0)))
    if constraint_residual > FEASIBILITY_TOLERANCE * beq_scale:
        raise InfeasibleConstraints(
            f"equality constraints violated by {constraint_residual:.3e} after the KKT solve"
        )
    kkt_residual = residual(sol)
    logger.info(
        "KKT solve: d=%d, m=%d, kkt residual %.3e, constraint residual %.3e",
        d, m, kkt_residual, constraint_residual,
    )
    return KKTSolution(z, mu, kkt_residual, constraint_residual, regularized)


@dataclass(frozen=True)
class SolveReport:
    coeffs_a: np.ndarray
    coeffs_b: np.ndarray
    J_n: float
    K_star: np.ndarray
    gain_residual: float
    feasibility: np.ndarray
    kkt_residual: float
    d_constraint_max: float
    constraint_residual: float
    solver_tolerance: float = KKT_ACCEPT_TOLERANCE
    method: Method = Method.IS
    alpha: float = 0.0
    n: int = 0
    initial_condition: InitialCondition = InitialCondition.DATA


def feedback_gain(Y_star, U_star, strict=True):
    """Least-squares K with K Y*' = -U*'; returns (K, relative residual).

    With strict=False a rank-deficient Y* yields the minimum-norm solution
    instead of RankDeficientOutputs.
    """
    Y = np.atleast_2d(np.asarray(Y_star, dtype=float))
    U = np.atleast_2d(np.asarray(U_star, dtype=float))
    if Y.shape[0] != U.shape[0]:
        raise DimensionError("Y* and U* must have one row per collocation node")
    if Y.shape[0] < Y.shape[1]:
        raise RankDeficientOutputs(
            f"{Y.shape[0]} nodes cannot determine a gain for {Y.shape[1]} outputs"
        )
    singular = np.linalg.svd(Y, compute_uv=False)
    cutoff = GAIN_RANK_TOLERANCE * (singular[0] if singular.size else 0.0)
    rank = int(np.sum(singular > cutoff)) if singular.size and singular[0] > 0 else 0
    if rank < Y.shape[1]:
        if strict:
            raise RankDeficientOutputs(f"output samples have rank {rank} < n_y = {Y.shape[1]}")
        logger.warning("output rank %d < %d, using minimum-norm gain", rank, Y.shape[1])
    Kt = scipy.linalg.lstsq(Y, -U, cond=GAIN_RANK_TOLERANCE)[0]
    K = Kt.T
    residual = np.max(np.abs(K @ Y.T + U.T), initial=0.0) / max(
        1.0, float(np.max(np.abs(U), initial=0.0))
    )
    return K, float(residual)


def coefficient_matrices(qp, z):
    """Unpack a QP solution into modal coefficient matrices (a, b)."""
    z = np.asarray(z, dtype=float)
    if z.shape != (qp.d,):
        raise DimensionError(f"solution has {z.size} entries, layout needs {qp.d}")
    n_x, n_u = qp.problem.n_x, qp.problem.n_u
    if qp.method is Method.IS:
        a = z[qp.variable_layout["a"]].reshape(n_x, qp.L_x + 1)
        b = z[qp.variable_layout["b"]].reshape(n_u, qp.L_u + 1)
        return a, b
    T = transform_matrix(qp.grid)
    N = qp.grid.n + 1
    a = z[qp.variable_layout["x_t"]].reshape(n_x, N) @ T.T
    b = z[qp.variable_layout["u_t"]].reshape(n_u, N) @ T.T
    return a, b


def feasibility_errors(problem, ops, a, b, initial_condition=InitialCondition.DATA):
    """Per-node maximum absolute residual of the collocated dynamics over the states."""
    N = ops.grid.n + 1
    X = ops.G_at_t @ a.T
    integral = ops.M_x @ a.T @ problem.A.T + ops.M_u @ b.T @ problem.B.T
    if InitialCondition.parse(initial_condition) is InitialCondition.EXPLICIT:
        start = a @ ((-1.0) ** np.arange(a.shape[1]))
    else:
        start = problem.x0
    E = np.abs(integral + np.outer(np.ones(N), start) - X)
    return np.max(E, axis=1)


def recover(problem, grid, qp, kkt):
    """Build the SolveReport (cost, feasibility, D residual, gain) from a KKT solution."""
    a, b = coefficient_matrices(qp, kkt.solution)
    ops = assemble_modal_operators(grid, a.shape[1] - 1, b.shape[1] - 1)
    z = kkt.solution
    J_n = 0.5 * float(z @ (qp.H @ z))
    feasibility = feasibility_errors(problem, ops, a, b, qp.initial_condition)
    X = ops.G_at_t @ a.T
    U = ops.G_at_t_u @ b.T
    d_max = float(np.max(np.abs(X @ problem.D), initial=0.0))
    K, gain_residual = feedback_gain(X @ problem.C.T, U, strict=False)
    logger.info(
        "recovered solution: J_n=%.6f, max feasibility %.3e, D residual %.3e",
        J_n, float(np.max(feasibility)), d_max,
    )
    return SolveReport(
        coeffs_a=a,
        coeffs_b=b,
        J_n=J_n,
        K_star=K,
        gain_residual=gain_residual,
        feasibility=feasibility,
        kkt_residual=kkt.kkt_residual,
        d_constraint_max=d_max,
        constraint_residual=kkt.constraint_residual,
        method=qp.method,
        alpha=grid.alpha,
        n=grid.n,
        initial_condition=qp.initial_condition,
    )


def _state_at(report, grid, problem, t):
    t = np.asarray(t, dtype=float)
    L_x = report.coeffs_a.shape[1] - 1
    L_u = report.coeffs_b.shape[1] - 1
    u = report.coeffs_b @ tg_eval_series(grid.map, grid.alpha, L_u, t)
    if report.initial_condition is InitialCondition.EXPLICIT:
        return report.coeffs_a @ tg_eval_series(grid.map, grid.alpha, L_x, t), u
    # x(t) = x0 + int_0^t (Ax + Bu) by the node quadrature, which reproduces
    # the collocated values at the nodes and x0 at t = 0
    eta = np.outer(grid.E, t).ravel()
    x_eta = report.coeffs_a @ tg_eval_series(grid.map, grid.alpha, L_x, eta)
    u_eta = report.coeffs_b @ tg_eval_series(grid.map, grid.alpha, L_u, eta)
    f = (problem.A @ x_eta + problem.B @ u_eta).reshape(problem.n_x, grid.n + 1, t.size)
    x = problem.x0[:, None] + t * np.einsum("k,rkm->rm", grid.P, f)
    return x, u


def sample_trajectory(report, grid, problem, m=100):
    """Evaluate x, u and y = Cx at m equally spaced times in [0, t_n].

    With x0 as data the state comes from the collocated integral equation, so
    row 0 is x0 exactly; with explicit initial rows it is the modal expansion.
    """
    if m < 2:
        raise DomainError("trajectory needs at least two samples")
    t = np.linspace(0.0, grid.t_nodes[-1], m)
    x, u = _state_at(report, grid, problem, t)
    y = problem.C @ x
    columns = {"t": t}
    columns.update({f"x{r + 1}": x[r] for r in range(problem.n_x)})
    columns.update({f"u{s + 1}": u[s] for s in range(problem.n_u)})
    columns.update({f"y{q + 1}": y[q] for q in range(problem.n_y)})
    return pl.DataFrame(columns)


def constraint_trace(report, grid, problem, m=100):
    """|D'x(t)| at m equally spaced times in [0, t_n]."""
    t = np.linspace(0.0, grid.t_nodes[-1], max(m, 2))
    x, _ = _state_at(report, grid, problem, t)
    residual = np.abs(problem.D.T @ x)
    columns = {"t": t}
    columns.update({f"d{c + 1}": residual[c] for c in range(problem.c_1)})
    return pl.DataFrame(columns)


@dataclass(frozen=True)
class AdvisedParameters:
    alpha: float
    L_range: tuple
    alpha_range: tuple = None


def advise_parameters(family, regime, n):
    """Recommended (alpha, L) ranges for TG-IS collocation."""
    family = TGFamily.parse(family)
    regime = Regime.parse(regime)
    if n < 1:
        raise DomainError("mesh size n must be positive")
    if regime is Regime.STRETCHING:
        L_range = (15.0, 25.0) if family is TGFamily.RG else (10.0, 20.0)
        return AdvisedParameters(0.5, L_range, (0.5, 0.5))
    if n > 40:
        return AdvisedParameters(0.0, (0.0, 1.0), (0.0, 0.0))
    # Small meshes tolerate any alpha > -1/2; faster quadrature decay as alpha decreases
    return AdvisedParameters(-0.2, (0.0, 1.0), (-0.5, float("inf")))


def solve(
    problem,
    family,
    alpha,
    L,
    n,
    method=Method.IS,
    L_x=None,
    L_u=None,
    initial_condition=InitialCondition.DATA,
):
    """build_grid -> assemble -> solve_kkt -> recover; returns (grid, qp, report)."""
    method = Method.parse(method)
    grid = build_grid(TGMap(family, L), alpha, n)
    if method is Method.IS:
        qp = assemble_is(problem, grid, L_x, L_u, initial_condition)
    else:
        qp = assemble_ips(problem, grid, initial_condition)
    kkt = solve_kkt(qp)
    return grid, qp, recover(problem, grid, qp, kkt)


def solve_schedule(problem, family, L, schedule, method=Method.IS, **kwargs):
    """Solve for each (n, alpha) of the schedule; returns (table, last grid, last report)."""
    rows, grid, report = [], None, None
    for n, alpha in schedule:
        start = time.perf_counter()
        grid, _, report = solve(problem, family, alpha, L, n, method, **kwargs)
        seconds = time.perf_counter() - start
        rows.append(
            {
                "n": int(n),
                "alpha": float(alpha),
                "J_n": report.J_n,
                "max_feasibility": float(np.max(report.feasibility)),
                "d_constraint_max": report.d_constraint_max,
                "kkt_residual": report.kkt_residual,
                "seconds": seconds,
            }
        )
        logger.info("schedule n=%d alpha=%g: J_n=%.6f (%.2f s)", n, alpha, report.J_n, seconds)
    return pl.DataFrame(rows), grid, report
