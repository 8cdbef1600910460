"""
-----------------------------------------------------------------
fairpol - outcome-disparity controlled policy learning
-----------------------------------------------------------------

Discrete-action ModBrk programs.

When actions, groups and covariates are all discrete, the ModBrk problem is
a linear program in the policy table. This module builds the binary-action
and general-action programs, solves them with a dense two-phase simplex and
checks them against a brute-force oracle.

Key features:
- Build the binary program over p(A=1 | s, x) and the general program over p(a | s, x)
- Pairwise moderation rows bounded by +/- sqrt(epsilon)
- Dense two-phase tableau simplex (Dantzig pivots, then Bland's rule)
- Enumeration oracle over deterministic policies and pairwise mixtures
- CSV problem files (a,s,x,muY and s,x,p) and solution dumps (a,s,x,prob)

Usage:
- Use `load_problem()` then `build_lp_binary()` or `build_lp_general()`.
- Use `simplex_solve()` to solve and `save_solution()` to write the policy table.
"""

import itertools
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import pandas as pd

from .errors import ContractError, SchemaError

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
ITERATION_LIMIT = "iteration_limit"

TOL = 1e-9
MAX_ORACLE_CELLS = 64
ORACLE_STEP = 1.0 / 64.0

DATA_DIR = Path(__file__).parent / "data"
EXAMPLE_PROBLEM = DATA_DIR / "lp_example.csv"


@dataclass
class DiscreteProblem:
    """
    muY[i, j, k] = mu^Y(a_values[i], s_values[j], x_values[k]);
    p[j, k] = p(s_values[j], x_values[k]).
    """
    a_values: tuple
    s_values: tuple
    x_values: tuple
    muY: np.ndarray
    p: np.ndarray
    epsilon: float = math.inf

    def __post_init__(self):
        self.a_values = tuple(self.a_values)
        self.s_values = tuple(self.s_values)
        self.x_values = tuple(self.x_values)
        self.muY = np.asarray(self.muY, dtype=float)
        self.p = np.asarray(self.p, dtype=float)
        shape = (len(self.a_values), len(self.s_values), len(self.x_values))
        if min(shape) < 1:
            raise ContractError("every value set must be nonempty")
        if self.muY.shape != shape or self.p.shape != shape[1:]:
            raise ContractError(f"tables must have shapes {shape} and {shape[1:]}")
        if not (np.isfinite(self.muY).all() and np.isfinite(self.p).all()):
            raise ContractError("tables must be finite")
        if (self.p < 0).any() or abs(float(self.p.sum()) - 1.0) > 1e-9:
            raise ContractError(f"p must be nonnegative and sum to 1, sums to {self.p.sum()}")
        if not self.epsilon >= 0:
            raise ContractError(f"epsilon must be >= 0, got {self.epsilon}")

    @property
    def shape(self):
        return self.muY.shape

    @property
    def pairs(self):
        """Group index pairs (j, j') with j' < j."""
        return [(j, jp) for j in range(len(self.s_values)) for jp in range(j)]

    def with_epsilon(self, epsilon):
        return replace(self, epsilon=epsilon)


@dataclass
class LPInstance:
    """
    maximize c.x subject to A_ub x <= b_ub, A_eq x = b_eq, lower <= x <= upper.

    variables[k] names column k: (s, x) for the binary program, (a, s, x)
    for the general one. constant is the objective term dropped by the
    binary parameterization.
    """
    kind: str
    variables: list
    c: np.ndarray
    A_ub: np.ndarray
    b_ub: np.ndarray
    A_eq: np.ndarray
    b_eq: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    constant: float = 0.0

    def __post_init__(self):
        n = len(self.variables)
        self.c = np.asarray(self.c, dtype=float)
        self.A_ub = np.asarray(self.A_ub, dtype=float).reshape(-1, n)
        self.b_ub = np.asarray(self.b_ub, dtype=float).ravel()
        self.A_eq = np.asarray(self.A_eq, dtype=float).reshape(-1, n)
        self.b_eq = np.asarray(self.b_eq, dtype=float).ravel()
        self.lower = np.asarray(self.lower, dtype=float)
        self.upper = np.asarray(self.upper, dtype=float)
        if self.c.shape != (n,) or self.lower.shape != (n,) or self.upper.shape != (n,):
            raise ContractError("objective and bounds must have one entry per variable")
        if self.A_ub.shape[0] != self.b_ub.size or self.A_eq.shape[0] != self.b_eq.size:
            raise ContractError("row counts do not match right-hand sides")
        if not (np.isfinite(self.lower).all() and np.isfinite(self.upper).all()):
            raise ContractError("every variable must be bounded")
        if (self.lower > self.upper).any():
            raise ContractError("lower bound above upper bound")

    @property
    def n_variables(self):
        return len(self.variables)


@dataclass
class LPSolution:
    x: np.ndarray
    objective: float
    status: str
    expected_outcome: float = None
    iterations: int = 0

    @property
    def optimal(self):
        return self.status == OPTIMAL


@dataclass
class OracleResult:
    value: float
    policy: np.ndarray = None
    deterministic_value: float = -math.inf
    refined: bool = False
    candidates: int = field(default=0, repr=False)


# ---------------------------------------------------------------------------
# Builders
# ---------------------------------------------------------------------------

def _slack_bound(epsilon):
    return math.inf if math.isinf(epsilon) else math.sqrt(epsilon)


def _pair_rows(problem, group_vectors):
    """Two one-sided rows per pair: v_s - v_s' <= sqrt(eps) and v_s' - v_s <= sqrt(eps)."""
    bound = _slack_bound(problem.epsilon)
    rows, rhs = [], []
    for j, jp in problem.pairs:
        diff = group_vectors[j] - group_vectors[jp]
        rows += [diff, -diff]
        rhs += [bound, bound]
    return rows, rhs


def build_lp_binary(problem):
    """
    Binary-action program over pi(s, x) = p(A = 1 | s, x).

    Objective sum p(s, x) delta(s, x) pi(s, x) with delta = muY(1) - muY(0);
    the constant sum p(s, x) muY(0, s, x) is stored on the instance.

    Returns:
        LPInstance: One variable per (s, x) cell.
    """
    if sorted(float(a) for a in problem.a_values) != [0.0, 1.0]:
        raise ContractError(f"binary program needs actions {{0, 1}}, got {problem.a_values}")
    i0 = [float(a) for a in problem.a_values].index(0.0)
    i1 = 1 - i0
    n_s, n_x = problem.p.shape
    weighted = problem.p * (problem.muY[i1] - problem.muY[i0])

    variables = [(s, x) for s in problem.s_values for x in problem.x_values]
    group_vectors = []
    for j in range(n_s):
        vec = np.zeros((n_s, n_x))
        vec[j] = weighted[j]
        group_vectors.append(vec.ravel())
    rows, rhs = _pair_rows(problem, group_vectors)
    n = len(variables)
    return LPInstance(kind="binary", variables=variables, c=weighted.ravel(),
                      A_ub=np.array(rows).reshape(-1, n), b_ub=rhs,
                      A_eq=np.zeros((0, n)), b_eq=[],
                      lower=np.zeros(n), upper=np.ones(n),
                      constant=float(np.sum(problem.p * problem.muY[i0])))


def build_lp_general(problem):
    """
    General program over pi(a, s, x) = p(A = a | s, x).

    Moderation rows use each action's effect relative to the first action
    level, so with two levels they coincide with the binary rows.

    Returns:
        LPInstance: One variable per (a, s, x) cell and one sum-to-one row per (s, x).
    """
    n_a, n_s, n_x = problem.shape
    if n_a < 2:
        raise ContractError("general program needs at least two action levels")
    variables = [(a, s, x) for a in problem.a_values for s in problem.s_values for x in problem.x_values]
    n = len(variables)
    c = (problem.p[None, :, :] * problem.muY).ravel()

    effect = problem.p[None, :, :] * (problem.muY - problem.muY[0:1])
    group_vectors = []
    for j in range(n_s):
        vec = np.zeros((n_a, n_s, n_x))
        vec[:, j, :] = effect[:, j, :]
        group_vectors.append(vec.ravel())
    rows, rhs = _pair_rows(problem, group_vectors)

    A_eq = np.zeros((n_s * n_x, n))
    for j, k in itertools.product(range(n_s), range(n_x)):
        cell = np.zeros((n_a, n_s, n_x))
        cell[:, j, k] = 1.0
        A_eq[j * n_x + k] = cell.ravel()
    return LPInstance(kind="general", variables=variables, c=c,
                      A_ub=np.array(rows).reshape(-1, n), b_ub=rhs,
                      A_eq=A_eq, b_eq=np.ones(n_s * n_x),
                      lower=np.zeros(n), upper=np.ones(n))


# ---------------------------------------------------------------------------
# Dense two-phase simplex
# ---------------------------------------------------------------------------

def _pivot(T, row, col):
    T[row] /= T[row, col]
    factors = T[:, col].copy()
    factors[row] = 0.0
    T -= np.outer(factors, T[row])


def _entering(z_row, bland):
    reduced = z_row[:-1]
    if bland:
        idx = np.flatnonzero(reduced < -TOL)
        return int(idx[0]) if idx.size else -1
    j = int(np.argmin(reduced))
    return j if reduced[j] < -TOL else -1


def _leaving(T, col, basis):
    column = T[:-1, col]
    candidates = np.flatnonzero(column > TOL)
    if candidates.size == 0:
        return -1
    ratios = T[candidates, -1] / column[candidates]
    best = ratios.min()
    ties = candidates[ratios <= best + TOL]
    # lowest basic variable index among ties
    return int(min(ties, key=lambda r: basis[r]))


def _run_simplex(T, basis, max_iter=50_000):
    m, n = T.shape[0] - 1, T.shape[1] - 1
    warm = 2 * (m + n)
    for it in range(max_iter):
        col = _entering(T[-1], bland=it >= warm)
        if col < 0:
            return OPTIMAL, it
        row = _leaving(T, col, basis)
        if row < 0:
            return UNBOUNDED, it
        _pivot(T, row, col)
        basis[row] = col
    return ITERATION_LIMIT, max_iter


def _standard_rows(lp):
    """Shift x = lower + x' and collect (row, rhs, sense) with x' >= 0."""
    rows, rhs, senses = [], [], []
    finite = np.isfinite(lp.b_ub)
    shift_ub = lp.A_ub @ lp.lower
    for row, b, sh in zip(lp.A_ub[finite], lp.b_ub[finite], shift_ub[finite]):
        rows.append(row)
        rhs.append(b - sh)
        senses.append("<=")
    n = lp.n_variables
    for k in range(n):
        row = np.zeros(n)
        row[k] = 1.0
        rows.append(row)
        rhs.append(lp.upper[k] - lp.lower[k])
        senses.append("<=")
    for row, b in zip(lp.A_eq, lp.b_eq - lp.A_eq @ lp.lower):
        rows.append(row)
        rhs.append(b)
        senses.append("=")
    return np.array(rows).reshape(-1, n), np.array(rhs), senses


def simplex_solve(lp):
    """
    Solve an LPInstance with a dense two-phase tableau simplex.

    Phase 1 minimizes the artificial variables; phase 2 maximizes c.x from
    the resulting basis. The first 2 * (rows + cols) pivots use the largest
    reduced cost, later ones Bland's rule.

    Args:
        lp (LPInstance): The program.

    Returns:
        LPSolution: Values, LP objective, full expected outcome and status.
    """
    A, b, senses = _standard_rows(lp)
    n = lp.n_variables
    negative = b < 0
    A[negative] *= -1.0
    b[negative] *= -1.0
    senses = [{"<=": ">=", ">=": "<="}.get(sense, sense) if neg else sense
              for sense, neg in zip(senses, negative)]

    m = len(senses)
    n_slack = sum(sense in ("<=", ">=") for sense in senses)
    n_art = sum(sense in ("=", ">=") for sense in senses)
    total = n + n_slack + n_art
    T = np.zeros((m + 1, total + 1))
    T[:m, :n] = A
    T[:m, -1] = b
    basis = []
    slack_col, art_col = n, n + n_slack
    art_start = art_col
    for i, sense in enumerate(senses):
        if sense == "<=":
            T[i, slack_col] = 1.0
            basis.append(slack_col)
            slack_col += 1
        else:
            if sense == ">=":
                T[i, slack_col] = -1.0
                slack_col += 1
            T[i, art_col] = 1.0
            basis.append(art_col)
            art_col += 1

    # phase 1: maximize -sum(artificials)
    T[-1, art_start:total] = 1.0
    for i, col in enumerate(basis):
        if col >= art_start:
            T[-1] -= T[i]
    status, it1 = _run_simplex(T, basis)
    if status != OPTIMAL:
        return LPSolution(np.full(n, np.nan), math.nan, status, iterations=it1)
    if T[-1, -1] < -1e-8:
        logging.info(f"LP infeasible: phase-1 residual {-T[-1, -1]:.3g}")
        return LPSolution(np.full(n, np.nan), math.nan, INFEASIBLE, iterations=it1)

    keep_rows = list(range(m))
    for i, col in enumerate(basis):
        if col < art_start:
            continue
        candidates = np.flatnonzero(np.abs(T[i, :art_start]) > TOL)
        if candidates.size:
            _pivot(T, i, int(candidates[0]))
            basis[i] = int(candidates[0])
        else:
            keep_rows.remove(i)
    T = np.vstack([T[keep_rows], T[-1:]])
    basis = [basis[i] for i in keep_rows]
    T = np.hstack([T[:, :art_start], T[:, -1:]])

    # phase 2
    c = np.zeros(art_start)
    c[:n] = lp.c
    T[-1] = 0.0
    T[-1, :art_start] = -c
    for i, col in enumerate(basis):
        if c[col] != 0:
            T[-1] += c[col] * T[i]
    status, it2 = _run_simplex(T, basis)
    if status != OPTIMAL:
        return LPSolution(np.full(n, np.nan), math.nan, status, iterations=it1 + it2)

    shifted = np.zeros(art_start)
    for i, col in enumerate(basis):
        shifted[col] = T[i, -1]
    x = np.clip(lp.lower + shifted[:n], lp.lower, lp.upper)
    objective = float(lp.c @ x)
    logging.info(f"LP {lp.kind}: optimal objective {objective:.6g} after {it1 + it2} pivots")
    return LPSolution(x=x, objective=objective, status=OPTIMAL,
                      expected_outcome=objective + lp.constant, iterations=it1 + it2)


def check_feasible(lp, x, tol=1e-8):
    """True when x satisfies bounds, equality rows and inequality rows within tol."""
    x = np.asarray(x, dtype=float)
    if (x < lp.lower - tol).any() or (x > lp.upper + tol).any():
        return False
    if lp.A_eq.size and np.abs(lp.A_eq @ x - lp.b_eq).max() > tol:
        return False
    finite = np.isfinite(lp.b_ub)
    return not (finite.any() and (lp.A_ub[finite] @ x - lp.b_ub[finite]).max() > tol)


# ---------------------------------------------------------------------------
# Policy tables
# ---------------------------------------------------------------------------

def solution_to_policy(problem, lp, solution):
    """
    Policy table prob[i, j, k] = p(a_values[i] | s_values[j], x_values[k]).
    """
    if not solution.optimal:
        raise ContractError(f"no policy for a {solution.status} solution")
    n_a, n_s, n_x = problem.shape
    if lp.kind == "general":
        return solution.x.reshape(n_a, n_s, n_x).copy()
    pi = solution.x.reshape(n_s, n_x)
    table = np.zeros((n_a, n_s, n_x))
    i0 = [float(a) for a in problem.a_values].index(0.0)
    table[i0] = 1.0 - pi
    table[1 - i0] = pi
    return table


def policy_value(problem, table):
    """Expected outcome sum p(s, x) muY(a, s, x) prob(a | s, x)."""
    return float(np.sum(problem.p[None] * problem.muY * table))


def policy_rows(problem, table):
    """Moderation row values v_s - v_s' per pair for a policy table."""
    effect = problem.p[None] * (problem.muY - problem.muY[0:1])
    per_group = np.sum(effect * table, axis=(0, 2))
    return np.array([per_group[j] - per_group[jp] for j, jp in problem.pairs])


# ---------------------------------------------------------------------------
# Enumeration oracle
# ---------------------------------------------------------------------------

def enumerate_oracle(problem, step=ORACLE_STEP, top_k=8):
    """
    Brute-force optimum for small programs.

    Every deterministic policy is scored. When the best one violates the
    moderation rows, pairwise mixtures of the top_k deterministic policies
    with all others are searched on a grid of the given step.

    Args:
        problem (DiscreteProblem): At most 64 (a, s, x) cells.
        step (float): Mixture grid step.
        top_k (int): Number of best deterministic policies to mix from.

    Returns:
        OracleResult: Best feasible value found and its policy table.
    """
    n_a, n_s, n_x = problem.shape
    if n_a * n_s * n_x > MAX_ORACLE_CELLS:
        raise ContractError(f"oracle supports at most {MAX_ORACLE_CELLS} cells, got {n_a * n_s * n_x}")
    bound = _slack_bound(problem.epsilon)
    cells = n_s * n_x

    choices = np.array(list(itertools.product(range(n_a), repeat=cells)))
    n_pol = choices.shape[0]
    p_flat = problem.p.ravel()
    mu_flat = problem.muY.reshape(n_a, cells)
    effect_flat = (problem.p[None] * (problem.muY - problem.muY[0:1])).reshape(n_a, cells)
    cell_idx = np.arange(cells)

    values = np.sum(p_flat[None, :] * mu_flat[choices, cell_idx[None, :]], axis=1)
    cell_effect = effect_flat[choices, cell_idx[None, :]].reshape(n_pol, n_s, n_x).sum(axis=2)
    rows = np.column_stack([cell_effect[:, j] - cell_effect[:, jp] for j, jp in problem.pairs]) \
        if problem.pairs else np.zeros((n_pol, 0))

    def feasible(row_values):
        return np.all(np.abs(row_values) <= bound + 1e-12, axis=-1)

    def table_of(k):
        table = np.zeros((n_a, cells))
        table[choices[k], cell_idx] = 1.0
        return table.reshape(n_a, n_s, n_x)

    ok = feasible(rows)
    best_det = int(np.argmax(np.where(ok, values, -np.inf)))
    result = OracleResult(value=float(values[best_det]) if ok[best_det] else -math.inf,
                          policy=table_of(best_det) if ok[best_det] else None,
                          candidates=n_pol)
    result.deterministic_value = result.value
    if ok[int(np.argmax(values))]:
        return result

    result.refined = True
    lambdas = np.arange(0.0, 1.0 + step / 2, step)
    for k in np.argsort(-values, kind="stable")[:top_k]:
        mix_values = lambdas[:, None] * values[k] + (1.0 - lambdas[:, None]) * values[None, :]
        mix_rows = lambdas[:, None, None] * rows[k] + (1.0 - lambdas[:, None, None]) * rows[None, :, :]
        mix_values = np.where(feasible(mix_rows), mix_values, -np.inf)
        li, other = np.unravel_index(int(np.argmax(mix_values)), mix_values.shape)
        if mix_values[li, other] > result.value:
            result.value = float(mix_values[li, other])
            result.policy = lambdas[li] * table_of(k) + (1.0 - lambdas[li]) * table_of(other)
    return result


# ---------------------------------------------------------------------------
# Files
# ---------------------------------------------------------------------------

def _read_table(path, columns):
    try:
        frame = pd.read_csv(path)
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise SchemaError(f"cannot parse {path}: {e}") from e
    if list(frame.columns) != columns:
        raise SchemaError(f"{path}: expected columns {columns}, got {list(frame.columns)}")
    numeric = frame.apply(pd.to_numeric, errors="coerce")
    if numeric.isna().any().any():
        raise SchemaError(f"{path}: non-numeric or missing values")
    return numeric


def default_p_path(muy_path):
    path = Path(muy_path)
    return path.with_name(path.stem + ".p.csv")


def load_problem(muy_path, p_path=None, epsilon=math.inf):
    """
    Read a DiscreteProblem from `a,s,x,muY` and `s,x,p` CSV files.

    Args:
        muy_path (str): Outcome table.
        p_path (str): Covariate/group distribution; defaults to `<stem>.p.csv`.
        epsilon (float): Slack of the moderation rows.

    Returns:
        DiscreteProblem: The problem with sorted value sets.
    """
    p_path = p_path or default_p_path(muy_path)
    muy = _read_table(muy_path, ["a", "s", "x", "muY"])
    probs = _read_table(p_path, ["s", "x", "p"])
    if muy.duplicated(["a", "s", "x"]).any() or probs.duplicated(["s", "x"]).any():
        raise SchemaError("duplicate table entries")

    a_values = tuple(sorted(muy["a"].unique()))
    s_values = tuple(sorted(muy["s"].unique()))
    x_values = tuple(sorted(muy["x"].unique()))
    full = pd.MultiIndex.from_product([a_values, s_values, x_values], names=["a", "s", "x"])
    table = muy.set_index(["a", "s", "x"])["muY"].reindex(full)
    p_table = probs.set_index(["s", "x"])["p"].reindex(
        pd.MultiIndex.from_product([s_values, x_values], names=["s", "x"]))
    if table.isna().any() or p_table.isna().any():
        raise ContractError("tables are missing entries for some (a, s, x) cells")
    problem = DiscreteProblem(a_values, s_values, x_values,
                              table.to_numpy().reshape(len(a_values), len(s_values), len(x_values)),
                              p_table.to_numpy().reshape(len(s_values), len(x_values)), epsilon)
    logging.info(f"Loaded LP problem {problem.shape} from {muy_path}")
    return problem


def solution_frame(problem, table):
    rows = [{"a": a, "s": s, "x": x, "prob": float(table[i, j, k])}
            for i, a in enumerate(problem.a_values)
            for j, s in enumerate(problem.s_values)
            for k, x in enumerate(problem.x_values)]
    return pd.DataFrame(rows, columns=["a", "s", "x", "prob"])


def save_solution(problem, table, path):
    """Write the policy table as `a,s,x,prob`."""
    solution_frame(problem, table).to_csv(path, index=False, lineterminator="\n")
    logging.info(f"Saved LP solution to {path}")


def solve_problem(problem):
    """Binary program when actions are {0, 1}, general program otherwise."""
    binary = sorted(float(a) for a in problem.a_values) == [0.0, 1.0]
    lp = build_lp_binary(problem) if binary else build_lp_general(problem)
    return lp, simplex_solve(lp)
