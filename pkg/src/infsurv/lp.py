"""Dense two-phase primal simplex for small and medium linear programs.

Problems are stated as::

    minimize    c . v
    subject to  A_ub v <= b_ub
                A_eq v  = b_eq
                lower <= v <= upper      (lower may be -inf, upper +inf)

The solver moves to standard form (finite lower bounds shifted to zero,
upper-only variables mirrored, free variables split into a difference of
nonnegatives, a slack per inequality), runs phase 1 on artificial
variables, then phase 2 on the real costs.  Finite upper bounds are kept
as implicit variable bounds instead of extra rows.  Bland's rule picks the
entering and leaving variables, so the method cannot cycle.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from . import _backend
from .errors import DimensionMismatch, NumericalFailure

FEAS_TOL = 1e-9
PIVOT_TOL = 1e-12


class LpStatus(str, enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


def _as_matrix(a, n):
    if a is None:
        return np.zeros((0, n))
    a = np.array(a, dtype=float)
    return a.reshape(-1, n) if a.size else np.zeros((0, n))


@dataclass(frozen=True, eq=False)
class LpProblem:
    objective: np.ndarray
    constraint_matrix: np.ndarray = None
    rhs: np.ndarray = None
    lower: np.ndarray = None
    upper: np.ndarray = None
    eq_matrix: np.ndarray = None
    eq_rhs: np.ndarray = None

    def __post_init__(self):
        c = np.array(self.objective, dtype=float).ravel()
        n = c.shape[0]
        A = _as_matrix(self.constraint_matrix, n)
        u = np.zeros(0) if self.rhs is None else np.array(self.rhs, dtype=float).ravel()
        E = _as_matrix(self.eq_matrix, n)
        e = np.zeros(0) if self.eq_rhs is None else np.array(self.eq_rhs, dtype=float).ravel()
        lo = np.zeros(n) if self.lower is None else np.array(self.lower, dtype=float).ravel()
        hi = np.full(n, np.inf) if self.upper is None else np.array(self.upper, dtype=float).ravel()
        if A.shape != (u.shape[0], n) or E.shape != (e.shape[0], n):
            raise DimensionMismatch("constraint matrix and right-hand side disagree")
        if lo.shape != (n,) or hi.shape != (n,):
            raise DimensionMismatch("bounds must have one entry per variable")
        for name, arr in (("objective", c), ("constraint matrix", A), ("rhs", u),
                          ("equality matrix", E), ("equality rhs", e)):
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} must be finite")
        if np.any(lo == np.inf) or np.any(hi == -np.inf) or np.any(lo > hi):
            raise ValueError("inconsistent variable bounds")
        for name, arr in (("objective", c), ("constraint_matrix", A), ("rhs", u),
                          ("lower", lo), ("upper", hi), ("eq_matrix", E), ("eq_rhs", e)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n_variables(self) -> int:
        return self.objective.shape[0]

    @property
    def n_constraints(self) -> int:
        return self.constraint_matrix.shape[0] + self.eq_matrix.shape[0]


@dataclass(frozen=True, eq=False)
class LpSolution:
    """Solver outcome.

    ``duals`` and ``eq_duals`` are the sensitivities of the optimal value to
    the right-hand sides (so ``duals <= 0`` for a minimisation with ``<=``
    rows); they are only filled for optimal solutions.
    """

    status: LpStatus
    variables: np.ndarray = None
    objective_value: float = float("nan")
    duals: np.ndarray = None
    eq_duals: np.ndarray = None
    iterations: int = 0
    info: dict = field(default_factory=dict)

    @property
    def optimal(self) -> bool:
        return self.status is LpStatus.OPTIMAL


class _StandardForm:
    """``M y = h``, ``0 <= y <= ub``, plus the map back to ``v``."""

    def __init__(self, p: LpProblem):
        n = p.n_variables
        A = np.vstack([p.constraint_matrix, p.eq_matrix])
        h = np.concatenate([p.rhs, p.eq_rhs]).astype(float)
        m_ub = p.constraint_matrix.shape[0]
        cols, costs, ubs = [], [], []
        # v_j = offset_j + sum_k sign_k * y_k over the columns k built for j
        self.var_cols = []
        self.offset = np.zeros(n)
        for j in range(n):
            lo, hi, a, c = p.lower[j], p.upper[j], A[:, j], p.objective[j]
            k = len(cols)
            if np.isfinite(lo):
                self.offset[j] = lo
                h -= a * lo
                cols.append(a)
                costs.append(c)
                ubs.append(hi - lo)
                self.var_cols.append([(k, 1.0)])
            elif np.isfinite(hi):
                self.offset[j] = hi
                h -= a * hi
                cols.append(-a)
                costs.append(-c)
                ubs.append(np.inf)
                self.var_cols.append([(k, -1.0)])
            else:
                cols += [a, -a]
                costs += [c, -c]
                ubs += [np.inf, np.inf]
                self.var_cols.append([(k, 1.0), (k + 1, -1.0)])
        n_struct = len(cols)
        m = A.shape[0]
        M = np.column_stack(cols) if cols else np.zeros((m, 0))
        slack = np.zeros((m, m_ub))
        slack[np.arange(m_ub), np.arange(m_ub)] = 1.0
        M = np.hstack([M, slack])
        costs += [0.0] * m_ub
        ubs += [np.inf] * m_ub
        self.sign = np.where(h < 0, -1.0, 1.0)
        M *= self.sign[:, None]
        h *= self.sign
        # identity column per row: its slack when usable, else an artificial
        self.identity = np.empty(m, dtype=np.int64)
        artificial = []
        for i in range(m):
            if i < m_ub and self.sign[i] > 0:
                self.identity[i] = n_struct + i
            else:
                self.identity[i] = M.shape[1] + len(artificial)
                artificial.append(i)
        art = np.zeros((m, len(artificial)))
        art[artificial, np.arange(len(artificial))] = 1.0
        self.M = np.hstack([M, art])
        self.h = h
        self.n_real = M.shape[1]
        self.cost = np.array(costs + [0.0] * len(artificial))
        self.upper = np.array(ubs + [np.inf] * len(artificial))
        self.artificial_rows = np.array(artificial, dtype=np.int64)
        self.m_ub = m_ub

    def to_original(self, y):
        v = self.offset.copy()
        for j, parts in enumerate(self.var_cols):
            for k, s in parts:
                v[j] += s * y[k]
        return v


def _run(T, rhs, cost, basis, upper, at_upper, blocked, opt_tol, pivot_tol, max_iter):
    return _backend.simplex_core(T, rhs, cost, basis, upper, at_upper, blocked,
                                 opt_tol, pivot_tol, max_iter)


def solve_lp(
    problem: LpProblem,
    feas_tol: float = FEAS_TOL,
    pivot_tol: float = PIVOT_TOL,
    opt_tol: float = FEAS_TOL,
    max_iter: int | None = None,
) -> LpSolution:
    """Solve ``problem`` with the two-phase bounded-variable simplex method.

    Returns an :class:`LpSolution` whose status is optimal, infeasible or
    unbounded.  Raises :class:`NumericalFailure` when the iteration limit is
    hit, a pivot collapses, or the final point fails the feasibility check.
    """
    sf = _StandardForm(problem)
    m, n = sf.M.shape
    if max_iter is None:
        # Bland's rule is slow but sure; the cap only guards against bugs
        max_iter = max(100_000, 500 * (m + n))
    T = np.ascontiguousarray(sf.M)
    rhs = sf.h.copy()
    basis = sf.identity.copy()
    upper = np.ascontiguousarray(sf.upper)
    at_upper = np.zeros(n, dtype=np.int8)
    blocked = np.zeros(n, dtype=np.int8)
    scale = 1.0 + (np.max(np.abs(sf.h)) if m else 0.0)
    iterations = 0

    # phase 1
    is_art = np.zeros(n, dtype=bool)
    is_art[sf.n_real:] = True
    if sf.artificial_rows.size:
        c1 = is_art.astype(float)
        cost = c1 - c1[basis] @ T
        status, it = _run(T, rhs, cost, basis, upper, at_upper, blocked,
                          opt_tol, pivot_tol, max_iter)
        iterations += it
        if status != _backend.OPTIMAL:
            raise NumericalFailure(f"phase 1 stopped with status {status}")
        infeas = float(np.sum(rhs[is_art[basis]]))
        if infeas > feas_tol * scale:
            return LpSolution(LpStatus.INFEASIBLE, iterations=iterations,
                              info={"phase1_objective": infeas})
        # drive zero-level artificials out of the basis; one whose row has no
        # usable real column marks a redundant equality and stays basic at 0
        for i in np.flatnonzero(is_art[basis]):
            # basic columns are unit vectors, so they drop out here
            cand = np.flatnonzero(np.abs(T[i, :sf.n_real]) > pivot_tol)
            if cand.size == 0:
                continue
            q = cand[0]
            value = upper[q] if at_upper[q] else 0.0
            T[i] /= T[i, q]
            col = T[:, q].copy()
            col[i] = 0.0
            T -= np.outer(col, T[i])
            rhs[i] = value
            basis[i] = q
            at_upper[q] = 0
    blocked[is_art] = 1

    # phase 2
    c2 = sf.cost
    cost = c2 - c2[basis] @ T
    status, it = _run(T, rhs, cost, basis, upper, at_upper, blocked,
                      opt_tol, pivot_tol, max_iter)
    iterations += it
    if status == _backend.UNBOUNDED:
        return LpSolution(LpStatus.UNBOUNDED, iterations=iterations)
    if status != _backend.OPTIMAL:
        raise NumericalFailure(f"phase 2 stopped with status {status}")

    y = np.where(at_upper != 0, upper, 0.0)
    y[basis] = rhs
    v = sf.to_original(y)
    _certify(problem, v, feas_tol)

    # simplex multipliers of the signed system: y_s = c_B B^-1
    ys = c2[basis] @ T[:, sf.identity]
    marg = sf.sign * ys
    return LpSolution(
        LpStatus.OPTIMAL,
        variables=v,
        objective_value=float(problem.objective @ v),
        duals=marg[: sf.m_ub],
        eq_duals=marg[sf.m_ub:],
        iterations=iterations,
    )


def _certify(p: LpProblem, v, tol):
    slack_tol = tol * (1.0 + np.max(np.abs(v), initial=0.0))
    ok = np.all(p.constraint_matrix @ v <= p.rhs + slack_tol)
    ok &= np.all(np.abs(p.eq_matrix @ v - p.eq_rhs) <= slack_tol)
    ok &= np.all(v >= p.lower - slack_tol) and np.all(v <= p.upper + slack_tol)
    if not ok:
        raise NumericalFailure("final point violates the constraints beyond tolerance")


def format_lp(problem: LpProblem) -> str:
    """Plain-text dump: one line per item, 17 significant digits."""
    g = lambda a: " ".join(format(float(x), ".17g") for x in a)  # noqa: E731
    lines = [
        f"LP {problem.n_variables} {problem.constraint_matrix.shape[0]} {problem.eq_matrix.shape[0]}",
        "MIN " + g(problem.objective),
    ]
    for row, u in zip(problem.constraint_matrix, problem.rhs):
        lines.append("LE " + g(row) + " | " + format(float(u), ".17g"))
    for row, u in zip(problem.eq_matrix, problem.eq_rhs):
        lines.append("EQ " + g(row) + " | " + format(float(u), ".17g"))
    lines.append("LO " + g(problem.lower))
    lines.append("UP " + g(problem.upper))
    return "\n".join(lines) + "\n"


def parse_lp(text: str) -> LpProblem:
    lines = [ln.split() for ln in text.strip().splitlines()]
    _, n, m_ub, m_eq = lines[0]
    n = int(n)
    vec = lambda toks: np.array([float(t) for t in toks])  # noqa: E731
    c = vec(lines[1][1:])
    ub, ubr, eq, eqr = [], [], [], []
    for toks in lines[2:]:
        if toks[0] in ("LE", "EQ"):
            bar = toks.index("|")
            target = (ub, ubr) if toks[0] == "LE" else (eq, eqr)
            target[0].append(vec(toks[1:bar]))
            target[1].append(float(toks[bar + 1]))
        elif toks[0] == "LO":
            lo = vec(toks[1:])
        elif toks[0] == "UP":
            hi = vec(toks[1:])
    return LpProblem(c, np.array(ub).reshape(-1, n), ubr, lo, hi,
                     np.array(eq).reshape(-1, n), eqr)


def dump_lp(problem: LpProblem, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_lp(problem))
