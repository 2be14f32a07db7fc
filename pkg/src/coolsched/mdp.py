"""Cyclic MDP over (temperature, price regime) states, solved two ways.

The planner is a linear program over occupancy measures x[t, s, a] with
per-time normalization and cyclic flow-balance constraints; the temperature
component of the transition kernel is deterministic (grid-quantized thermal
step) and the regime component is the estimated Markov chain. A damped
relative value iteration on the same augmented chain serves as an
independent oracle for the optimal average cost.
"""

import json
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from .thermal import ChillerSpec, cooling_energy, cop, step_temperature

DT_SECONDS = 3600.0


class SolverError(RuntimeError):
    """LP solve or value-iteration oracle failed to reach its tolerance."""


@dataclass(frozen=True)
class StateSpace:
    """Uniform temperature grid crossed with M regimes and A_max+1 actions."""

    theta_min: float
    theta_max: float
    theta_step: float
    m: int
    a_max: int

    def __post_init__(self):
        if self.theta_step <= 0 or self.theta_max <= self.theta_min:
            raise ValueError("need theta_min < theta_max and theta_step > 0")
        if self.m < 1 or self.a_max < 1:
            raise ValueError("need m >= 1 and a_max >= 1")

    @property
    def theta_grid(self) -> np.ndarray:
        n_levels = int(round((self.theta_max - self.theta_min) / self.theta_step)) + 1
        return self.theta_min + self.theta_step * np.arange(n_levels)

    @property
    def n_theta(self) -> int:
        return len(self.theta_grid)

    @property
    def n_actions(self) -> int:
        return self.a_max + 1


def quantize(theta, space: StateSpace):
    """Nearest grid index; ties round up; values outside the grid clamp."""
    idx = np.floor((np.asarray(theta, dtype=float) - space.theta_min)
                   / space.theta_step + 0.5)
    idx = np.clip(idx, 0, space.n_theta - 1)
    return int(idx) if np.ndim(theta) == 0 else idx.astype(np.int64)


@dataclass(frozen=True)
class CostSpec:
    """Safety band and per-degree violation penalties."""

    t_min: float = 18.0
    t_max: float = 27.0
    lambda_under: float = 1000.0
    lambda_over: float = 1000.0

    def __post_init__(self):
        if self.t_min >= self.t_max:
            raise ValueError("need t_min < t_max")
        if self.lambda_under < 0 or self.lambda_over < 0:
            raise ValueError("penalties must be >= 0")


@dataclass
class MdpProblem:
    """One planning cycle: exogenous data plus thermal and cost parameters.

    All per-time arrays have length n (the cycle length); time wraps from
    t = n-1 back to t = 0.
    """

    space: StateSpace
    cost: CostSpec
    chiller: ChillerSpec
    t_out: np.ndarray    # (n,) outdoor degC
    q: np.ndarray        # (n,) heat load W
    prices: np.ndarray   # (n, M) representative $/MWh per regime
    trans: np.ndarray    # (n, M, M) row-stochastic regime transitions
    gamma_env: float
    c_heat: float
    dt: float = DT_SECONDS
    hours: np.ndarray = None  # optional absolute hour indices, length n

    def __post_init__(self):
        self.t_out = np.asarray(self.t_out, dtype=float)
        self.q = np.asarray(self.q, dtype=float)
        self.prices = np.asarray(self.prices, dtype=float)
        self.trans = np.asarray(self.trans, dtype=float)
        n, m = len(self.t_out), self.space.m
        if self.q.shape != (n,) or self.prices.shape != (n, m) \
                or self.trans.shape != (n, m, m):
            raise ValueError("exogenous cycles have inconsistent dimensions")
        if np.any(np.abs(self.trans.sum(axis=2) - 1.0) > 1e-9) or np.any(self.trans < 0):
            raise ValueError("transition matrices must be row-stochastic")
        grid = self.space.theta_grid
        if not (grid[0] < self.cost.t_min and self.cost.t_max < grid[-1]):
            raise ValueError("theta grid must contain [t_min, t_max] strictly inside")
        if self.gamma_env <= 0 or self.c_heat <= 0 or self.dt <= 0:
            raise ValueError("gamma_env, c_heat, dt must be > 0")
        if self.hours is not None:
            self.hours = np.asarray(self.hours, dtype=np.int64)
            if self.hours.shape != (n,):
                raise ValueError("hours must have length n")

    @property
    def n(self) -> int:
        return len(self.t_out)


def successor_temperatures(problem: MdpProblem) -> np.ndarray:
    """Continuous next temperatures, shape (n, n_theta, n_actions)."""
    grid = problem.space.theta_grid
    actions = np.arange(problem.space.n_actions)
    theta_eq = (problem.t_out[:, None]
                + (problem.q[:, None] - problem.chiller.eta * actions[None, :])
                / problem.gamma_env)                     # (n, A)
    decay = np.exp(-problem.gamma_env * problem.dt / problem.c_heat)
    return (theta_eq[:, None, :]
            + (grid[None, :, None] - theta_eq[:, None, :]) * decay)


def successor_indices(problem: MdpProblem) -> np.ndarray:
    """Quantized successor grid indices, shape (n, n_theta, n_actions)."""
    return quantize(successor_temperatures(problem), problem.space)


def cooling_energy_table(problem: MdpProblem) -> np.ndarray:
    """kWh per action at each time, shape (n, n_actions)."""
    cops = np.array([cop(problem.chiller, t) for t in problem.t_out])
    actions = np.arange(problem.space.n_actions)
    return (problem.chiller.eta * actions[None, :] / cops[:, None]) \
        * problem.dt / 3.6e6


def cost_tensor(problem: MdpProblem) -> np.ndarray:
    """Immediate costs c[t, theta_idx, p, a] of the planning cycle.

    Energy is priced at the regime's representative $/MWh; temperature
    violations are charged on the continuous successor, before quantization.
    """
    energy = cooling_energy_table(problem)                       # (n, A)
    succ = successor_temperatures(problem)                       # (n, L, A)
    over = np.maximum(0.0, succ - problem.cost.t_max)
    under = np.maximum(0.0, problem.cost.t_min - succ)
    penalty = problem.cost.lambda_over * over + problem.cost.lambda_under * under
    energy_cost = energy[:, None, :] * problem.prices[:, :, None] / 1000.0  # (n, M, A)
    return energy_cost[:, None, :, :] + penalty[:, :, None, :]


def immediate_cost(problem: MdpProblem, t: int, theta: float, p: int, a: int) -> float:
    """Cost of taking action a in state (theta, regime p) at time t."""
    energy = cooling_energy(problem.chiller, a, problem.t_out[t], problem.dt)
    succ = step_temperature(theta, problem.t_out[t], problem.q[t], a,
                            problem.chiller.eta, problem.gamma_env,
                            problem.c_heat, problem.dt)
    penalty = (problem.cost.lambda_over * max(0.0, succ - problem.cost.t_max)
               + problem.cost.lambda_under * max(0.0, problem.cost.t_min - succ))
    return energy * problem.prices[t, p - 1] / 1000.0 + penalty


@dataclass
class LpDescription:
    """Sparse equality-form LP over flattened occupancy variables."""

    c: np.ndarray
    a_eq: sp.csr_matrix
    b_eq: np.ndarray
    dims: tuple  # (n, n_theta, m, n_actions)

    @property
    def n_variables(self) -> int:
        return len(self.c)

    @property
    def n_constraints(self) -> int:
        return self.a_eq.shape[0]


def build_lp(problem: MdpProblem) -> LpDescription:
    """Assemble the occupancy-measure LP for the cyclic planning problem.

    Variables x[t, i, p, a] >= 0; objective (1/n) * sum(c * x); one
    normalization row per t and one flow-balance row per (t, state), with
    the final time step feeding back into the first.
    """
    n = problem.n
    L, m, A = problem.space.n_theta, problem.space.m, problem.space.n_actions
    nvar = n * L * m * A
    costs = cost_tensor(problem)
    succ_idx = successor_indices(problem)

    flat = np.arange(nvar, dtype=np.int64)
    a_idx = flat % A
    rest = flat // A
    p_idx = rest % m
    rest = rest // m
    i_idx = rest % L
    t_idx = rest // L

    norm_rows = t_idx
    inflow_rows = n + (t_idx * L + i_idx) * m + p_idx
    t_next = (t_idx + 1) % n
    j_next = succ_idx[t_idx, i_idx, a_idx]

    rows = [norm_rows, inflow_rows]
    cols = [flat, flat]
    vals = [np.ones(nvar), np.ones(nvar)]
    for p_to in range(m):
        rows.append(n + (t_next * L + j_next) * m + p_to)
        cols.append(flat)
        vals.append(-problem.trans[t_idx, p_idx, p_to])

    a_eq = sp.coo_matrix(
        (np.concatenate(vals),
         (np.concatenate(rows).astype(np.int64), np.concatenate(cols))),
        shape=(n + n * L * m, nvar),
    ).tocsr()
    a_eq.sum_duplicates()
    b_eq = np.zeros(n + n * L * m)
    b_eq[:n] = 1.0
    return LpDescription(c=costs.ravel() / n, a_eq=a_eq, b_eq=b_eq,
                         dims=(n, L, m, A))


@dataclass
class OccupancyMeasure:
    """Solved occupancy x[t, theta_idx, p, a] and the LP objective ($/step)."""

    x: np.ndarray
    objective: float

    def marginal_actions(self) -> np.ndarray:
        """Expected action count per time step, shape (n,)."""
        actions = np.arange(self.x.shape[3])
        return np.einsum("tipa,a->t", self.x, actions)


def solve_occupancy(lp: LpDescription) -> OccupancyMeasure:
    """Solve the occupancy LP with HiGHS at 1e-9 feasibility tolerances."""
    res = linprog(lp.c, A_eq=lp.a_eq, b_eq=lp.b_eq, bounds=(0, None),
                  method="highs",
                  options={"primal_feasibility_tolerance": 1e-9,
                           "dual_feasibility_tolerance": 1e-9})
    if not res.success:
        raise SolverError(
            f"occupancy LP failed: status={res.status} message={res.message!r} "
            f"iterations={getattr(res, 'nit', 'n/a')}"
        )
    x = np.maximum(res.x, 0.0).reshape(lp.dims)
    return OccupancyMeasure(x=x, objective=float(res.fun))


def check_occupancy(problem: MdpProblem, occ: OccupancyMeasure,
                    tol: float = 1e-6) -> dict:
    """Max normalization and cyclic flow-balance residuals; raises above tol."""
    x = occ.x
    n, L, m, A = x.shape
    norm_err = float(np.max(np.abs(x.sum(axis=(1, 2, 3)) - 1.0)))

    succ_idx = successor_indices(problem)
    flow_err = 0.0
    for t in range(n):
        t1 = (t + 1) % n
        inflow = np.zeros((L, m))
        # mass leaving (i, p, a) lands at theta index succ_idx[t, i, a],
        # spread over p' by the regime chain
        mass = np.einsum("ipa,pq->ipaq", x[t], problem.trans[t])  # (L, m, A, m)
        for a in range(A):
            np.add.at(inflow, succ_idx[t, :, a], mass[:, :, a, :].sum(axis=1))
        resid = np.abs(x[t1].sum(axis=2) - inflow)
        flow_err = max(flow_err, float(resid.max()))
    if norm_err > tol or flow_err > tol:
        raise SolverError(
            f"occupancy violates constraints: normalization {norm_err:.3e}, "
            f"flow {flow_err:.3e} (tolerance {tol:.1e})"
        )
    return {"normalization": norm_err, "flow": flow_err}


def _fallback_actions(problem: MdpProblem) -> np.ndarray:
    """Smallest action whose quantized successor stays at or below t_max."""
    grid = problem.space.theta_grid
    succ_vals = grid[successor_indices(problem)]       # (n, L, A)
    safe = succ_vals <= problem.cost.t_max + 1e-9
    first_safe = np.argmax(safe, axis=2)               # 0 if none safe
    any_safe = safe.any(axis=2)
    return np.where(any_safe, first_safe, problem.space.a_max)


@dataclass
class Policy:
    """Action distribution per (t, theta_idx, regime)."""

    probabilities: np.ndarray  # (n, n_theta, m, n_actions), rows sum to 1
    space: StateSpace
    hours: np.ndarray = None   # absolute hour indices of the cycle, optional
    objective: float = None

    def __post_init__(self):
        self.probabilities = np.asarray(self.probabilities, dtype=float)
        if self.probabilities.ndim != 4:
            raise ValueError("probabilities must be (n, n_theta, m, n_actions)")
        sums = self.probabilities.sum(axis=3)
        if np.any(self.probabilities < -1e-12) or np.any(np.abs(sums - 1.0) > 1e-6):
            raise ValueError("action distributions must be non-negative and sum to 1")

    @property
    def n(self) -> int:
        return self.probabilities.shape[0]

    def expected_actions(self) -> np.ndarray:
        """E[a] per (t, theta_idx, regime)."""
        actions = np.arange(self.probabilities.shape[3])
        return self.probabilities @ actions


def extract_policy(problem: MdpProblem, occ: OccupancyMeasure) -> Policy:
    """Conditional action law pi(a | t, s) = x[t,s,a] / sum_a x[t,s,a].

    States the occupancy never visits get a deterministic fallback: the
    smallest action keeping the quantized successor at or below t_max.
    """
    x = np.maximum(occ.x, 0.0)
    denom = x.sum(axis=3)
    visited = denom > 1e-12
    probs = np.zeros_like(x)
    np.divide(x, denom[..., None], out=probs, where=visited[..., None])

    fallback = _fallback_actions(problem)              # (n, L)
    n, L, m, A = x.shape
    fb_onehot = np.zeros((n, L, A))
    np.put_along_axis(fb_onehot, fallback[:, :, None], 1.0, axis=2)
    probs = np.where(visited[..., None], probs,
                     np.broadcast_to(fb_onehot[:, :, None, :], probs.shape))
    probs = probs / probs.sum(axis=3, keepdims=True)
    return Policy(probabilities=probs, space=problem.space,
                  hours=problem.hours, objective=occ.objective)


def plan(problem: MdpProblem) -> tuple:
    """Build, solve and extract: returns (occupancy, policy)."""
    occ = solve_occupancy(build_lp(problem))
    return occ, extract_policy(problem, occ)


def dp_oracle(problem: MdpProblem, tol: float = 1e-9,
              max_sweeps: int = 100_000, damping: float = 0.5):
    """Average-cost relative value iteration on the augmented (t, s) chain.

    The deterministic time component makes the chain periodic, so value
    iteration runs on the damped kernel (stay put with probability
    1 - damping), which preserves the gain and the optimal policy while
    restoring aperiodicity. Returns (gain, greedy Policy).

    Intended as an independent desk-scale oracle; refuses instances with
    more than 1e5 augmented states.
    """
    n = problem.n
    L, m, A = problem.space.n_theta, problem.space.m, problem.space.n_actions
    if n * L * m > 100_000:
        raise ValueError("dp_oracle is a desk-scale oracle; instance too large")
    costs = cost_tensor(problem)                        # (n, L, m, A)
    succ_idx = successor_indices(problem)               # (n, L, A)
    kappa = damping

    h = np.zeros((n, L, m))
    gain = None
    for sweep in range(max_sweeps):
        h_next = np.empty_like(h)
        for t in range(n):
            nxt = h[(t + 1) % n]                        # (L, m)
            gathered = nxt[succ_idx[t]]                 # (L, A, m)
            expect = np.einsum("pq,iaq->ipa", problem.trans[t], gathered)
            q_vals = costs[t] + kappa * expect + (1.0 - kappa) * h[t][:, :, None]
            h_next[t] = q_vals.min(axis=2)
        delta = h_next - h
        span = float(delta.max() - delta.min())
        gain = float(delta.max() + delta.min()) / 2.0
        if span <= tol * max(1.0, abs(gain)):
            h = h_next - h_next[0, 0, 0]
            break
        h = h_next - h_next[0, 0, 0]
    else:
        raise SolverError(
            f"value iteration did not converge in {max_sweeps} sweeps "
            f"(span {span:.3e}, gain {gain:.6e})"
        )

    probs = np.zeros((n, L, m, A))
    for t in range(n):
        nxt = h[(t + 1) % n]
        gathered = nxt[succ_idx[t]]
        expect = np.einsum("pq,iaq->ipa", problem.trans[t], gathered)
        q_vals = costs[t] + kappa * expect + (1.0 - kappa) * h[t][:, :, None]
        best = q_vals.argmin(axis=2)
        np.put_along_axis(probs[t], best[:, :, None], 1.0, axis=2)
    policy = Policy(probabilities=probs, space=problem.space,
                    hours=problem.hours, objective=gain)
    return gain, policy


def policy_to_dict(policy: Policy) -> dict:
    return {
        "kind": "policy",
        "n": policy.n,
        "theta_min": policy.space.theta_min,
        "theta_max": policy.space.theta_max,
        "theta_step": policy.space.theta_step,
        "m": policy.space.m,
        "a_max": policy.space.a_max,
        "hours": None if policy.hours is None else [int(h) for h in policy.hours],
        "objective": policy.objective,
        "probabilities": policy.probabilities.tolist(),
    }


def policy_from_dict(doc: dict) -> Policy:
    space = StateSpace(theta_min=doc["theta_min"], theta_max=doc["theta_max"],
                       theta_step=doc["theta_step"], m=doc["m"],
                       a_max=doc["a_max"])
    hours = None if doc.get("hours") is None else np.asarray(doc["hours"], dtype=np.int64)
    return Policy(probabilities=np.asarray(doc["probabilities"], dtype=float),
                  space=space, hours=hours, objective=doc.get("objective"))


def save_policy(policy: Policy, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(policy_to_dict(policy), fh, sort_keys=True)
        fh.write("\n")


def load_policy(path) -> Policy:
    with open(path, encoding="utf-8") as fh:
        return policy_from_dict(json.load(fh))
