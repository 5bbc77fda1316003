"""Iterative transmit-power policy optimization by per-slot improvement.

The expected combined cost is multilinear in the per-slot success
probabilities, so it is neither convex nor quasi-convex, but its slope in any
single coordinate has a one-dimensional structure: a constant part set by the
recursion tables plus the strictly convex-shaped power term
theta/(pi ln^2 pi).  That term attains its minimum at pi = e^-2, which makes
the per-slot minimizer a member of a two-point candidate set {0, min(pi0,
pi_max)} where pi0 is the unique stationary point, in (e^-2, pi_max), of the
slope, found here by bisection.  Each outer iteration recomputes the tables
under the incumbent policy, builds the per-slot candidates, and adopts the
best single-coordinate replacement, which drives the cost monotonically down.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .model import (
    ChannelParams,
    RecursionTables,
    SystemParams,
    compute_tables,
    expected_cost,
    policy_to_success,
    success_to_policy,
)

__all__ = [
    "OptimizerConfig",
    "OptimizationTrace",
    "stationary_success",
    "slot_candidates",
    "coordinate_sweep",
    "optimize_policy",
]

# Relative cost threshold below which two candidate policies count as tied;
# ties go to the smallest slot index (and to the incumbent over any modification).
TIE_TOL = 1e-12

_E_MINUS_2 = math.exp(-2.0)
_MAX_BISECTION_STEPS = 200


@dataclass(frozen=True)
class OptimizerConfig:
    """Knobs of the outer improvement loop."""

    k_max: int = 200          # maximum outer iterations
    eps_cost: float = 1e-10   # relative improvement quantum; a sweep keeps
                              # the incumbent below it, which stops the loop
    root_tol: float = 1e-12   # bisection tolerance on the stationary point
    ex2_1: float | None = None  # initial second moment E[x_1^2]; None -> sigma_x2
    init: str = "zero"        # starting policy: "zero" or "full"

    def __post_init__(self):
        if not (isinstance(self.k_max, (int, np.integer)) and self.k_max >= 1):
            raise ValueError(f"opt.k_max must be an integer >= 1 (got {self.k_max})")
        if not self.eps_cost > 0:
            raise ValueError(f"opt.eps_cost must be > 0 (got {self.eps_cost})")
        if not self.root_tol > 0:
            raise ValueError(f"opt.root_tol must be > 0 (got {self.root_tol})")
        if self.ex2_1 is not None and self.ex2_1 < 0:
            raise ValueError(f"opt.ex2_1 must be >= 0 (got {self.ex2_1})")
        if self.init not in ("zero", "full"):
            raise ValueError(f"opt.init must be 'zero' or 'full' (got {self.init!r})")


@dataclass
class OptimizationTrace:
    """Result of :func:`optimize_policy`.

    cost_history[0] is the cost of the starting policy and each further entry
    is the cost after one outer iteration; the sequence never increases.
    """

    policy: np.ndarray            # final per-slot powers
    success: np.ndarray           # the matching success probabilities
    cost_history: np.ndarray      # costs, length iterations + 1
    iterations: int
    converged: bool
    cost: float = field(init=False)

    def __post_init__(self):
        self.cost = float(self.cost_history[-1])


def stationary_success(A: float, ch: ChannelParams, tol: float) -> float | None:
    """Stationary success probability pi0 of the slope, if one exists.

    Solves A + theta/(pi ln^2 pi) = 0 on the interval (e^-2, pi_max), where
    the power term is strictly increasing so bisection cannot fail.  Returns
    None when the equation has no root there: either the slope is still
    negative at pi_max (the cap is the candidate) or it is already
    nonnegative at e^-2 (no descent direction beyond the candidate pair).
    """
    if not tol > 0:
        raise ValueError(f"bisection tolerance must be > 0 (got {tol})")
    lo, hi = _E_MINUS_2, ch.pi_max
    if hi <= lo:
        return None  # power cap keeps the whole feasible range left of e^-2
    theta = ch.theta
    f_lo = A + theta * math.e**2 / 4.0          # slope value at e^-2
    f_hi = A + theta / (hi * math.log(hi) ** 2)
    if f_hi <= 0.0 or f_lo >= 0.0:
        return None
    for _ in range(_MAX_BISECTION_STEPS):
        mid = 0.5 * (lo + hi)
        if A + theta / (mid * math.log(mid) ** 2) < 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= tol:
            break
    return 0.5 * (lo + hi)


def slot_candidates(
    sys: SystemParams,
    ch: ChannelParams,
    tables: RecursionTables,
    t: int,
    current_pi_t: float,
    root_tol: float = 1e-12,
) -> tuple[float, ...]:
    """Candidate success probabilities for slot t given frozen tables.

    The slope in pi_t is A + theta/(pi_t ln^2 pi_t) with the constant
    A = ex2[t] (r k^2 + (2abk + b^2 k^2) fbar[t+1]).  Its minimum over the
    feasible range sits at pi' = min(e^-2, pi_max); when the slope there is
    negative the slot minimizer is 0 or min(pi0, pi_max), otherwise the slot
    keeps its current value.
    """
    if tables.ex2 is None:
        raise ValueError("tables.ex2 missing: run the forward pass first")
    A = tables.ex2[t] * (
        sys.r * sys.k**2 + sys.closed_loop_coeff * tables.fbar[t + 1])
    pi_edge = min(_E_MINUS_2, ch.pi_max)
    min_slope = A + ch.theta / (pi_edge * math.log(pi_edge) ** 2)
    if min_slope >= 0.0:
        return (current_pi_t,)
    pi0 = stationary_success(A, ch, root_tol)
    top = ch.pi_max if pi0 is None else min(pi0, ch.pi_max)
    return (0.0, top)


def coordinate_sweep(
    sys: SystemParams,
    ch: ChannelParams,
    cfg: OptimizerConfig,
    policy: np.ndarray,
) -> tuple[np.ndarray, float]:
    """One outer iteration: best single-coordinate replacement of a policy.

    Computes the recursion tables under the incumbent, resolves the per-slot
    candidate winner for every t against the frozen tables, and adopts the
    single-coordinate modification with the lowest exact expected cost.  Ties
    among modifications go to the smallest slot index; the incumbent is kept
    unless the winner improves it by at least cfg.eps_cost relative, which
    makes a converged policy an exact fixed point of this function.
    """
    pi = policy_to_success(policy, ch)
    ex2_1 = sys.sigma_x2 if cfg.ex2_1 is None else cfg.ex2_1
    tables = compute_tables(sys, ch, pi, ex2_1)
    incumbent_cost = expected_cost(sys, ch, pi, ex2_1)

    best_t, best_v, best_cost = None, None, math.inf
    for t in range(sys.T):
        slot_v, slot_cost = None, math.inf
        for v in slot_candidates(sys, ch, tables, t, pi[t], cfg.root_tol):
            if v == pi[t]:
                trial_cost = incumbent_cost
            else:
                trial = pi.copy()
                trial[t] = v
                trial_cost = expected_cost(sys, ch, trial, ex2_1)
            if trial_cost < slot_cost:
                slot_v, slot_cost = v, trial_cost
        # a later slot displaces the running winner only when strictly
        # better beyond the tie tolerance
        if best_t is None or slot_cost < best_cost - TIE_TOL * abs(best_cost):
            best_t, best_v, best_cost = t, slot_v, slot_cost
    if best_cost < incumbent_cost - cfg.eps_cost * abs(incumbent_cost):
        best_pi = pi.copy()
        best_pi[best_t] = best_v
        return success_to_policy(best_pi, ch), best_cost
    return np.array(policy, dtype=float), incumbent_cost


def optimize_policy(
    sys: SystemParams, ch: ChannelParams, cfg: OptimizerConfig
) -> OptimizationTrace:
    """Run the full iterative improvement from the configured starting policy.

    Starts from the all-zero policy (or full power when cfg.init = "full";
    the terminal slot starts at 0 either way since transmitting there can
    never pay) and sweeps until no coordinate improves the cost by at least
    cfg.eps_cost relative, or cfg.k_max iterations have run.
    """
    if cfg.init == "zero":
        policy = np.zeros(sys.T)
    else:
        policy = np.full(sys.T, ch.p_max)
        policy[-1] = 0.0
    ex2_1 = sys.sigma_x2 if cfg.ex2_1 is None else cfg.ex2_1
    history = [expected_cost(sys, ch, policy_to_success(policy, ch), ex2_1)]
    converged = False
    iterations = 0
    for iterations in range(1, cfg.k_max + 1):
        new_policy, new_cost = coordinate_sweep(sys, ch, cfg, policy)
        history.append(new_cost)
        if np.array_equal(new_policy, policy):
            converged = True
            break
        policy = new_policy
    return OptimizationTrace(
        policy=policy,
        success=policy_to_success(policy, ch),
        cost_history=np.asarray(history),
        iterations=iterations,
        converged=converged,
    )
