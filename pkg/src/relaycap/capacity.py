import math
import time
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import brentq, minimize

from .channel import (
    DiscreteRelayChannel,
    StateChannel,
    check_state_recoverable,
    induced_joint,
    validate,
)
from .constants import (
    ACTIVE_LINK_TOLERANCE,
    BRANCH_BROADCAST,
    BRANCH_LINK,
    BRANCH_REPORT_TOLERANCE,
    BRANCH_TIE,
    DIVERGENCE_CAP,
    FEASIBILITY_SLACK,
    LOG2_E,
    PENALTY_WEIGHT,
    STALL_PATIENCE,
    TIE_TOLERANCE,
    ZERO_PROB,
)
from .errors import DimensionMismatch
from .info import (
    binary_entropy,
    conditional_mutual_information,
    conditional_mutual_information_probs,
    mutual_information,
    mutual_information_probs,
)
from .scheduler import Scheduler
from .schemas import JointPmf, OptimizerConfig, Pmf, RateCurve, RatePoint, Task, TestChannel
from .trace import log_event

_TINY = 1e-300


def project_to_simplex(
    v: np.ndarray,
):
    """Euclidean projection onto {p >= 0, sum p = 1}."""
    u = np.sort(v)[::-1]
    lambdas = (np.cumsum(u) - 1.0) / np.arange(1, v.size + 1)
    k = np.flatnonzero(u > lambdas)[-1]
    return np.maximum(v - lambdas[k], 0.0)


def _mi_rows(
    px: np.ndarray,
    w: np.ndarray,
):
    """I(X;Z) for rows w[x] = p(z|x), and D(w_x || q) per input (the gradient up to a constant)."""
    q = px @ w
    positive = w > ZERO_PROB
    log_w = np.log2(np.where(positive, w, 1.0))
    log_q = np.log2(np.maximum(q, _TINY))
    d = np.sum(np.where(positive, w * (log_w - log_q), 0.0), axis=1)
    d = np.minimum(d, DIVERGENCE_CAP)
    return max(float(px @ d), 0.0), d


def _relay_rows(
    transition: np.ndarray,
):
    size_x = transition.shape[0]
    return transition.sum(axis=2), transition.reshape(size_x, -1)


def blahut_arimoto(
    w: np.ndarray,
    tolerance: float = 1e-12,
    max_iterations: int = 10_000,
):
    """Capacity of the channel with rows w[x] = p(z|x); returns (bits, maximizing input)."""
    w = np.asarray(w, dtype=float)
    r = np.full(w.shape[0], 1.0 / w.shape[0])
    for _ in range(max_iterations):
        value, d = _mi_rows(r, w)
        # max_x D(w_x || q) bounds the capacity from above
        if d.max() - value < tolerance:
            break
        r = r * np.exp2(d - d.max())
        r /= r.sum()
    value, _ = _mi_rows(r, w)
    return value, r


def _branch(
    link: float,
    broadcast: float,
):
    if abs(link - broadcast) <= BRANCH_REPORT_TOLERANCE:
        return BRANCH_TIE
    return BRANCH_LINK if link < broadcast else BRANCH_BROADCAST


def cutset_terms(
    px: Pmf,
    ch: DiscreteRelayChannel,
    r0: float,
):
    """(I(X;Y) + r0, I(X;Y,Y1)) under p(x) p(y,y1|x)."""
    if r0 < 0:
        raise ValueError(f"r0 must be nonnegative, got {r0}")
    j = induced_joint(px, ch)
    return mutual_information(j, [0], [1]) + r0, mutual_information(j, [0], [1, 2])


def cutset_rate(
    px: Pmf,
    ch: DiscreteRelayChannel,
    r0: float,
):
    return min(cutset_terms(px, ch, r0))


def _cutset_point(
    ch: DiscreteRelayChannel,
    px: np.ndarray,
    r0: float,
    converged: bool,
    iterations: int,
):
    pmf = Pmf(probs=px / px.sum())
    link, broadcast = cutset_terms(pmf, ch, r0)
    return RatePoint(
        r0=r0,
        rate=min(link, broadcast),
        argmax_input=pmf.probs.tolist(),
        link_term=link,
        broadcast_term=broadcast,
        active_branch=_branch(link, broadcast),
        converged=converged,
        iterations=iterations,
    )


def _ascent_step(
    point: np.ndarray,
    gradient: np.ndarray,
    step: float,
):
    tangent = gradient - gradient.mean()
    norm = np.linalg.norm(tangent)
    if norm < 1e-15:
        return point, True
    return project_to_simplex(point + step * tangent / norm), False


def _supergradient_ascent(
    px: np.ndarray,
    w_y: np.ndarray,
    w_yy1: np.ndarray,
    r0: float,
    cfg: OptimizerConfig,
):
    best_value, best_px = -math.inf, px
    last_improvement = 0
    for t in range(1, cfg.max_iterations + 1):
        i_y, d_y = _mi_rows(px, w_y)
        i_yy1, d_yy1 = _mi_rows(px, w_yy1)
        link = i_y + r0
        value = min(link, i_yy1)
        if value > best_value + cfg.tolerance:
            last_improvement = t
        if value > best_value:
            best_value, best_px = value, px
        if t - last_improvement > STALL_PATIENCE:
            return best_px, best_value, t, True

        if link < i_yy1 - TIE_TOLERANCE:
            gradient = d_y
        elif i_yy1 < link - TIE_TOLERANCE:
            gradient = d_yy1
        else:
            gradient = 0.5 * (d_y + d_yy1)
        px, stationary = _ascent_step(px, gradient, cfg.step_scale / math.sqrt(t))
        if stationary:
            return best_px, best_value, t, True
    return best_px, best_value, cfg.max_iterations, False


def _slsqp_polish(
    px: np.ndarray,
    w_y: np.ndarray,
    w_yy1: np.ndarray,
    r0: float,
):
    # epigraph form: max t s.t. t <= I(X;Y) + r0, t <= I(X;Y,Y1)
    k = px.size

    def term(
        w: np.ndarray,
        offset: float,
    ):
        def fun(z):
            return _mi_rows(np.clip(z[:k], 0.0, None), w)[0] + offset - z[-1]

        def jac(z):
            _, d = _mi_rows(np.clip(z[:k], 0.0, None), w)
            return np.append(d - LOG2_E, -1.0)

        return {"type": "ineq", "fun": fun, "jac": jac}

    start_value = min(_mi_rows(px, w_y)[0] + r0, _mi_rows(px, w_yy1)[0])
    result = minimize(
        lambda z: -z[-1],
        np.append(px, start_value),
        jac=lambda z: np.append(np.zeros(k), -1.0),
        method="SLSQP",
        bounds=[(0.0, 1.0)] * k + [(None, None)],
        constraints=[
            term(w_y, r0),
            term(w_yy1, 0.0),
            {
                "type": "eq",
                "fun": lambda z: z[:k].sum() - 1.0,
                "jac": lambda z: np.append(np.ones(k), 0.0),
            },
        ],
        options={"ftol": 1e-15, "maxiter": 500},
    )
    return project_to_simplex(result.x[:k]), bool(result.success)


def theorem1_capacity(
    ch: DiscreteRelayChannel,
    r0: float,
    cfg: OptimizerConfig,
    execution_start: float | None = None,
):
    """max over p(x) of min{I(X;Y) + r0, I(X;Y,Y1)}."""
    execution_start = execution_start or time.time()
    if r0 < 0:
        raise ValueError(f"r0 must be nonnegative, got {r0}")
    validate(ch)
    w_y, w_yy1 = _relay_rows(ch.transition)
    rng = np.random.default_rng(cfg.seed)

    starts = [
        np.full(ch.size_x, 1.0 / ch.size_x),
        blahut_arimoto(w_y, max_iterations=cfg.max_iterations)[1],
        blahut_arimoto(w_yy1, max_iterations=cfg.max_iterations)[1],
    ]
    starts += [rng.dirichlet(np.ones(ch.size_x)) for _ in range(cfg.restarts)]

    best_value, best_px, converged = -math.inf, starts[0], False
    iterations = 0
    for start in starts:
        px, value, used, ok = _supergradient_ascent(start, w_y, w_yy1, r0, cfg)
        iterations += used
        if value > best_value:
            best_value, best_px, converged = value, px, ok

    polished, polish_ok = _slsqp_polish(best_px, w_y, w_yy1, r0)
    polished_value = min(_mi_rows(polished, w_y)[0] + r0, _mi_rows(polished, w_yy1)[0])
    if polished_value > best_value:
        best_px = polished
    converged = converged or polish_ok

    if not converged:
        log_event(
            execution_start,
            "⚠️",
            "OPTIMIZER",
            f"theorem-1 search at r0={r0} did not converge after {iterations} iterations",
        )
    return _cutset_point(ch, best_px, r0, converged, iterations)


def identity_test_channel(
    size_y1: int,
    extra_columns: int = 0,
):
    return TestChannel(matrix=np.hstack([np.eye(size_y1), np.zeros((size_y1, extra_columns))]))


def constant_test_channel(
    size_y1: int,
    size_y1hat: int = 1,
    column: int = 0,
):
    matrix = np.zeros((size_y1, size_y1hat))
    matrix[:, column] = 1.0
    return TestChannel(matrix=matrix)


def _erasure_mix_probs(
    matrix: np.ndarray,
    theta: float,
):
    mixed = (1.0 - theta) * matrix
    mixed[:, -1] += theta
    return mixed


def erasure_mix(
    tc: TestChannel,
    theta: float,
):
    """With probability theta replace the description by the last column (the erasure symbol)."""
    return TestChannel(matrix=_erasure_mix_probs(tc.matrix, theta))


def backward_crossover(
    p: float,
    r0: float,
):
    """q in [0, min(p, 1-p)] with H(p) - H(q) = r0 (q = 0 once r0 >= H(p))."""
    h_p = binary_entropy(p)
    if r0 <= 0:
        return min(p, 1.0 - p)
    if r0 >= h_p:
        return 0.0
    return brentq(lambda q: h_p - binary_entropy(q) - r0, 0.0, min(p, 1.0 - p), xtol=1e-15)


def binary_backward_test_channel(
    p: float,
    q: float,
):
    """Forward law p(s_hat|s) of the backward channel S = S_hat xor U, U ~ Bern(q), S ~ Bern(p)."""
    if not 0.0 <= q <= min(p, 1.0 - p) or q >= 0.5:
        raise ValueError(f"need 0 <= q <= min(p, 1-p) and q < 1/2, got p={p}, q={q}")
    if p in (0.0, 1.0):
        return identity_test_channel(2)
    r = (p - q) / (1.0 - 2.0 * q)
    p_hat = np.array([1.0 - r, r])
    p_s = np.array([1.0 - p, p])
    backward = np.array([[1.0 - q, q], [q, 1.0 - q]])  # p(s|s_hat)
    matrix = (p_hat[None, :] * backward.T) / p_s[:, None]
    return TestChannel(matrix=matrix / matrix.sum(axis=1, keepdims=True))


def _compressed_probs(
    px: Pmf,
    ch: DiscreteRelayChannel,
    tc: TestChannel,
):
    if tc.size_y1 != ch.size_y1:
        raise DimensionMismatch(
            f"test channel has {tc.size_y1} input rows, relay alphabet has {ch.size_y1}"
        )
    return induced_joint(px, ch).probs[..., None] * tc.matrix[None, None]


def cf_rate(
    px: Pmf,
    ch: DiscreteRelayChannel,
    tc: TestChannel,
):
    """(I(X;Y,Yhat1), I(Y1;Yhat1|Y)) under p(x) p(y,y1|x) p(yhat1|y1)."""
    j = JointPmf(probs=_compressed_probs(px, ch, tc))
    return mutual_information(j, [0], [1, 3]), conditional_mutual_information(j, [2], [3], [1])


def chf_rate(
    px: Pmf,
    ch: DiscreteRelayChannel,
    tc: TestChannel,
    r0: float,
):
    """Compress-hash-and-forward: cover Y1 by Yhat1, hash whatever link rate is left."""
    if r0 < 0:
        raise ValueError(f"r0 must be nonnegative, got {r0}")
    j = JointPmf(probs=_compressed_probs(px, ch, tc))
    link_cost = conditional_mutual_information(j, [2], [3], [1])
    i_y = mutual_information(j, [0], [1])
    i_y_hat = mutual_information(j, [0], [1, 3])
    if link_cost >= r0:
        return min(i_y + r0, i_y_hat)
    delta = r0 - link_cost
    return min(i_y_hat + delta, mutual_information(j, [0], [1, 2, 3]))


def ah_rate(
    px: Pmf,
    state_ch: StateChannel,
    tc: TestChannel,
):
    """(I(X;Y|S_hat), I(S;S_hat|Y)) with the relay output identified with the state."""
    j = JointPmf(probs=_compressed_probs(px, state_ch.to_relay_channel(), tc))
    return conditional_mutual_information(j, [0], [1], [3]), conditional_mutual_information(
        j, [2], [3], [1]
    )


def _joint4(
    px: np.ndarray,
    transition: np.ndarray,
    tc: np.ndarray,
):
    return px[:, None, None, None] * transition[..., None] * tc[None, None]


def _link_cost(
    px: np.ndarray,
    transition: np.ndarray,
    tc: np.ndarray,
):
    return conditional_mutual_information_probs(_joint4(px, transition, tc), (2,), (3,), (1,))


def _repair(
    px: np.ndarray,
    transition: np.ndarray,
    tc: np.ndarray,
    r0: float,
):
    """Mix toward the erasure column until I(Y1;Yhat1|Y) <= r0."""
    if _link_cost(px, transition, tc) <= r0 + FEASIBILITY_SLACK:
        return tc
    erasure = _erasure_mix_probs(tc, 1.0)
    if r0 <= FEASIBILITY_SLACK:
        return erasure

    # the cost is nonincreasing in theta: more erasure is a degraded description
    theta = brentq(
        lambda th: _link_cost(px, transition, _erasure_mix_probs(tc, th)) - r0,
        0.0,
        1.0,
        xtol=1e-14,
    )
    theta = min(1.0, theta + 1e-9)
    repaired = _erasure_mix_probs(tc, theta)
    if _link_cost(px, transition, repaired) > r0 + FEASIBILITY_SLACK:
        return erasure
    return repaired


def _tc_gradient(
    px: np.ndarray,
    transition: np.ndarray,
    tc: np.ndarray,
):
    """d I(X; Y, Yhat1) / d p(yhat1|y1)."""
    joint = px[:, None, None] * transition
    r = np.einsum("xya,ab->xyb", joint, tc)
    denom = px[:, None, None] * r.sum(axis=0)[None]
    ratio = np.log2(np.maximum(r, _TINY)) - np.log2(np.maximum(denom, _TINY))
    ratio = np.clip(ratio, -DIVERGENCE_CAP, DIVERGENCE_CAP)
    return np.einsum("xya,xyb->ab", joint, ratio)


def _ascent_rows(
    tc: np.ndarray,
    gradient: np.ndarray,
    step: float,
):
    tangent = gradient - gradient.mean(axis=1, keepdims=True)
    norm = np.linalg.norm(tangent)
    if norm < 1e-15:
        return tc
    moved = tc + step * tangent / norm
    return np.vstack([project_to_simplex(row) for row in moved])


def _alternating_ascent(
    transition: np.ndarray,
    r0: float,
    cfg: OptimizerConfig,
    objective: Callable[[np.ndarray], float],
):
    """Alternate px and p(yhat1|y1) ascent steps on I(X;Y,Yhat1) under the link constraint.

    Returns the best feasible (value, px, tc), the iteration count and whether any
    start stalled (converged) before max_iterations.
    """
    size_x, _, size_y1 = transition.shape
    size_hat = size_y1 + 1
    w_y, w_yy1 = _relay_rows(transition)
    rng = np.random.default_rng(cfg.seed)

    identity = np.hstack([np.eye(size_y1), np.zeros((size_y1, 1))])
    starts = [
        (np.full(size_x, 1.0 / size_x), identity),
        (blahut_arimoto(w_yy1, max_iterations=cfg.max_iterations)[1], identity),
        (blahut_arimoto(w_y, max_iterations=cfg.max_iterations)[1], identity),
    ]
    starts += [
        (rng.dirichlet(np.ones(size_x)), rng.dirichlet(np.ones(size_hat), size=size_y1))
        for _ in range(cfg.restarts)
    ]

    best = (-math.inf, starts[0][0], identity)
    iterations, converged = 0, False
    for px, tc in starts:
        tc = _repair(px, transition, tc, r0)
        local_best, last_improvement = -math.inf, 0
        for t in range(1, cfg.max_iterations + 1):
            iterations += 1
            value = objective(_joint4(px, transition, tc))
            if value > local_best + cfg.tolerance:
                last_improvement = t
            local_best = max(local_best, value)
            if value > best[0]:
                best = (value, px, tc)
            if t - last_improvement > STALL_PATIENCE:
                converged = True
                break

            step = cfg.step_scale / math.sqrt(t)
            w_hat = np.einsum("xya,ab->xyb", transition, tc).reshape(size_x, -1)
            i_hat, d_hat = _mi_rows(px, w_hat)
            i_y, d_y = _mi_rows(px, w_y)
            # on deterministic channels I(Y1;Yhat1|Y) = I(X;Y,Yhat1) - I(X;Y)
            # on the active boundary the rate is I(X;Y) + r0
            if i_hat - i_y < r0 - ACTIVE_LINK_TOLERANCE:
                gradient = d_hat
            else:
                gradient = d_hat - PENALTY_WEIGHT * (d_hat - d_y)
            px, _ = _ascent_step(px, gradient, step)

            tc = _ascent_rows(tc, _tc_gradient(px, transition, tc), step)
            tc = _repair(px, transition, tc, r0)
    return best, iterations, converged


def _cf_objective(
    joint: np.ndarray,
):
    return mutual_information_probs(joint, (0,), (1, 3))


def _ah_objective(
    joint: np.ndarray,
):
    return conditional_mutual_information_probs(joint, (0,), (1,), (3,))


def cf_optimal(
    ch: DiscreteRelayChannel,
    r0: float,
    cfg: OptimizerConfig,
    execution_start: float | None = None,
):
    """Best compress-and-forward rate with |Yhat1| = |Y1| + 1 subject to I(Y1;Yhat1|Y) <= r0."""
    execution_start = execution_start or time.time()
    if r0 < 0:
        raise ValueError(f"r0 must be nonnegative, got {r0}")
    validate(ch)
    (_, px, tc), iterations, converged = _alternating_ascent(
        ch.transition, r0, cfg, _cf_objective
    )
    pmf = Pmf(probs=px / px.sum())
    witness = TestChannel(matrix=tc / tc.sum(axis=1, keepdims=True))
    rate, link_cost = cf_rate(pmf, ch, witness)
    if not converged:
        log_event(
            execution_start,
            "⚠️",
            "OPTIMIZER",
            f"compress-and-forward search at r0={r0} did not converge",
        )
    return RatePoint(
        r0=r0,
        rate=rate,
        argmax_input=pmf.probs.tolist(),
        witness=witness,
        link_cost=link_cost,
        converged=converged,
        iterations=iterations,
    )


def ah_optimal(
    state_ch: StateChannel,
    r0: float,
    cfg: OptimizerConfig,
    compare_theorem1: bool = False,
    execution_start: float | None = None,
):
    """max I(X;Y|S_hat) subject to I(S;S_hat|Y) <= r0 with |S_hat| = |S| + 1."""
    execution_start = execution_start or time.time()
    if r0 < 0:
        raise ValueError(f"r0 must be nonnegative, got {r0}")
    if compare_theorem1:
        check_state_recoverable(state_ch)
    ch = state_ch.to_relay_channel()
    (_, px, tc), iterations, converged = _alternating_ascent(
        ch.transition, r0, cfg, _ah_objective
    )
    pmf = Pmf(probs=px / px.sum())
    witness = TestChannel(matrix=tc / tc.sum(axis=1, keepdims=True))
    rate, link_cost = ah_rate(pmf, state_ch, witness)
    if not converged:
        log_event(
            execution_start,
            "⚠️",
            "OPTIMIZER",
            f"rate-limited state search at r0={r0} did not converge",
        )
    point = RatePoint(
        r0=r0,
        rate=rate,
        argmax_input=pmf.probs.tolist(),
        witness=witness,
        link_cost=link_cost,
        converged=converged,
        iterations=iterations,
    )
    if compare_theorem1:
        point = with_theorem1_gap(point, ch, cfg, execution_start)
    return point


def with_theorem1_gap(
    point: RatePoint,
    ch: DiscreteRelayChannel,
    cfg: OptimizerConfig,
    execution_start: float | None = None,
):
    reference = theorem1_capacity(ch, point.r0, cfg, execution_start)
    return point.model_copy(update={"theorem1": reference.rate, "gap": reference.rate - point.rate})


def _enforce_monotone(
    ch: DiscreteRelayChannel,
    points: list[RatePoint],
):
    # C(r0) is nondecreasing: the previous maximizer is feasible at the next r0
    repaired = list(points)
    for i in range(1, len(repaired)):
        previous, current = repaired[i - 1], repaired[i]
        if previous.error or current.error or current.rate >= previous.rate:
            continue
        candidate = _cutset_point(
            ch,
            np.asarray(previous.argmax_input),
            current.r0,
            current.converged,
            current.iterations,
        )
        if candidate.rate > current.rate:
            repaired[i] = candidate
    return repaired


def capacity_curve(
    ch: DiscreteRelayChannel,
    r0grid: Sequence[float],
    cfg: OptimizerConfig,
    workers: int | None = None,
    execution_start: float | None = None,
):
    execution_start = execution_start or time.time()
    grid = [float(r0) for r0 in r0grid]
    if any(r0 < 0 for r0 in grid):
        raise ValueError("r0 grid must be nonnegative")
    if any(b < a for a, b in zip(grid, grid[1:])):
        raise ValueError("r0 grid must be sorted")
    validate(ch)

    tasks = [Task(idx=i, name="theorem1", args={"r0": r0}) for i, r0 in enumerate(grid)]
    results = Scheduler(workers).schedule_tasks(
        tasks=tasks,
        handlers={
            "theorem1": lambda r0: theorem1_capacity(ch, r0, cfg, execution_start),
        },
        execution_start=execution_start,
    )
    points = [
        result.value
        if result.ok
        else RatePoint(r0=r0, rate=0.0, argmax_input=[], converged=False, error=result.error)
        for result, r0 in zip(results, grid)
    ]
    return RateCurve(points=_enforce_monotone(ch, points))


def audit_curve(
    curve: RateCurve,
    tolerance: float = 1e-6,
):
    """Violations of: nondecreasing, slope <= 1, nonincreasing slopes (concavity)."""
    points = [point for point in curve.points if point.error is None]
    violations: list[str] = []
    for previous, current in zip(points, points[1:]):
        d_r0 = current.r0 - previous.r0
        d_rate = current.rate - previous.rate
        if d_rate < -tolerance:
            violations.append(f"decreases between r0={previous.r0} and r0={current.r0}")
        if d_rate > d_r0 + tolerance:
            violations.append(f"slope exceeds 1 between r0={previous.r0} and r0={current.r0}")
    for left, middle, right in zip(points, points[1:], points[2:]):
        dx_left, dx_right = middle.r0 - left.r0, right.r0 - middle.r0
        if dx_left <= 0 or dx_right <= 0:
            continue
        slope_left = (middle.rate - left.rate) / dx_left
        slope_right = (right.rate - middle.rate) / dx_right
        if slope_right > slope_left + 2 * tolerance * (1 / dx_left + 1 / dx_right):
            violations.append(f"not concave around r0={middle.r0}")
    return violations
