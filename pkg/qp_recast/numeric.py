# qp_recast/numeric.py

"""
Floating-point verification of recasts.

Systems are integrated in logarithmic coordinates u = ln x, where the QP
vector field reads u' = lambda + A exp(B u). Positivity is then automatic and
the floor on x becomes a terminal event on u.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .errors import (
    DimensionMismatch,
    NonPositiveState,
    OffLevelSet,
    PositivityLost,
    ReplayMismatch,
    StepFailure,
)
from .exactalg import inverse
from .qpmodel import as_float_array, validate
from .transforms import VARIABLES, StepKind, apply_step

logger = logging.getLogger(__name__)

DEFAULT_TOL = 1e-9
DEFAULT_METHOD = "DOP853"
POSITIVITY_FLOOR = 1e-12
LEVEL_TOL = 1e-9

ORIGINAL = "original"
REPARAMETRIZED = "reparametrized"


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    time_label: str = ORIGINAL
    names: tuple = ()

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        states = np.atleast_2d(np.asarray(self.states, dtype=float))
        if states.shape[0] != times.shape[0]:
            raise DimensionMismatch(
                "states", f"{states.shape[0]} states for {times.shape[0]} times"
            )
        if np.any(np.diff(times) <= 0):
            raise ValueError("trajectory times must be strictly increasing")
        if np.any(states <= 0):
            raise NonPositiveState("trajectory states must be strictly positive")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "states", states)

    def __len__(self):
        return len(self.times)

    @property
    def final(self):
        return self.states[-1]


@dataclass(frozen=True)
class EquivalenceReport:
    max_abs_log_error: float
    integral_drifts: tuple = field(default=())
    horizon: float = 0.0
    samples: int = 0

    def max_drift(self):
        return max((drift for _, drift in self.integral_drifts), default=0.0)

    def passed(self, threshold):
        return self.max_abs_log_error <= threshold and self.max_drift() <= threshold


def _as_log_state(x0, n):
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (n,):
        raise DimensionMismatch("x0", f"initial point has shape {x0.shape}, expected ({n},)")
    if np.any(x0 <= 0):
        raise NonPositiveState(f"initial point {x0.tolist()} is not strictly positive")
    return np.log(x0)


def _log_field(sys):
    lam = np.array([float(v) for v in sys.lam])
    A = as_float_array(sys.A)
    B = as_float_array(sys.B)

    def rhs(u):
        with np.errstate(over="ignore"):
            return lam + A @ np.exp(B @ u)

    return rhs


def _floor_event(count, floor):
    """Terminal event when any of the first `count` log components reaches ln(floor)."""
    log_floor = np.log(floor)

    def event(_, y):
        return np.min(y[:count]) - log_floor

    event.terminal = True
    event.direction = -1
    return event


def _solve(rhs, span, y0, tol, method, events, dense=False, t_eval=None):
    with np.errstate(over="ignore", invalid="ignore"):
        return solve_ivp(
            rhs,
            span,
            y0,
            method=method,
            rtol=tol,
            atol=tol,
            events=events,
            dense_output=dense,
            t_eval=t_eval,
        )


def _raise_for_status(solution, floor_event_index, make_partial):
    if solution.status == -1:
        raise StepFailure(f"integration failed: {solution.message}", make_partial())
    if solution.status == 1 and len(solution.t_events[floor_event_index]):
        raise PositivityLost(float(solution.t_events[floor_event_index][0]), make_partial())


def integrate(
    sys,
    x0,
    t_end,
    tol=DEFAULT_TOL,
    method=DEFAULT_METHOD,
    floor=POSITIVITY_FLOOR,
    t_eval=None,
):
    """
    Adaptive explicit Runge-Kutta integration of the QP system from x0 over
    [0, t_end]. Raises PositivityLost when a component reaches `floor` and
    StepFailure when the solver gives up; both carry the partial trajectory.
    """
    validate(sys)
    if t_end <= 0 or tol <= 0:
        raise ValueError("t_end and tol must be positive")
    u0 = _as_log_state(x0, sys.n)
    rhs = _log_field(sys)
    solution = _solve(
        lambda _, u: rhs(u),
        (0.0, float(t_end)),
        u0,
        tol,
        method,
        [_floor_event(sys.n, floor)],
        t_eval=t_eval,
    )

    def partial():
        return Trajectory(solution.t, np.exp(solution.y.T), ORIGINAL, sys.var_names)

    _raise_for_status(solution, 0, partial)
    logger.debug(f"integrate: {len(solution.t)} samples, {solution.nfev} evaluations")
    return partial()


def check_conservation(traj, fi):
    """max |F(t)/F(0) - 1| for F = prod x_i^e_i along the trajectory."""
    exponents = np.array([float(e) for e in fi.exponents])
    if exponents.shape[0] != traj.states.shape[1]:
        raise DimensionMismatch("exponents", "integral and trajectory dimensions differ")
    logs = np.log(traj.states) @ exponents
    return float(np.max(np.abs(np.expm1(logs - logs[0]))))


# ===================================================================
# TRACE MAPPING
# ===================================================================
class TraceMapper:
    """
    Walks a reduction trace from the original system and keeps, as rows of
    one affine map over [current log variables | quadrature logs]:

      - ln x of the original variables,
      - ln(dt_physical / dt_current),
      - for each quadrature, the log of the variables it refers to and the
        log time rate in force when it was split off.

    The initial point is mapped along the same steps.
    """

    def __init__(self, original, x0, embedded_value=1.0):
        # constants from embed_constants are always 1; embedded_value seeds
        # decoupled embedded variables only
        self.system = original
        self.u = _as_log_state(x0, original.n)
        self.q = np.zeros(0)
        self.embedded_log = float(np.log(embedded_value))
        n = original.n
        self.W = np.vstack([np.eye(n), np.zeros((1, n))])
        self.offset = np.zeros(n + 1)
        self.n_original = n
        self.time_row = n
        self.quadratures = []
        self.reparametrized = False

    @property
    def n_current(self):
        return self.u.shape[0]

    def _with_current_columns(self, fn):
        """Replace the current-variable block of W by fn(block)."""
        block = fn(self.W[:, : self.n_current])
        self.W = np.hstack([block, self.W[:, self.n_current :]])

    def walk(self, trace):
        for step in trace:
            self.apply(step)
        return self

    def apply(self, step):
        kind = step.kind
        if kind == StepKind.QUASIMONOMIAL:
            C = as_float_array(step.matrix)
            self.u = as_float_array(inverse(step.matrix)) @ self.u
            self._with_current_columns(lambda block: block @ C)
        elif kind == StepKind.PERMUTE and step.axis == VARIABLES:
            order = list(step.order)
            self.u = self.u[order]
            self._with_current_columns(lambda block: block[:, order])
        elif kind in (StepKind.EMBED_CONSTANTS, StepKind.EMBED_DECOUPLED):
            if kind == StepKind.EMBED_CONSTANTS:
                p, value = step.matrix.cols, 0.0
            else:
                p, value = step.matrix.rows, self.embedded_log
            self._with_current_columns(
                lambda block: np.hstack([block, np.zeros((block.shape[0], p))])
            )
            self.u = np.concatenate([self.u, np.full(p, value)])
        elif kind == StepKind.NEW_TIME:
            beta = np.array([float(b) for b in step.vector])
            self.W[self.time_row, : self.n_current] += beta
            self.reparametrized = True
        elif kind == StepKind.DECOUPLE:
            self._decouple(step)
        self.system = apply_step(self.system, step)

    def _decouple(self, step):
        r = step.retained
        n = self.n_current
        if step.vector is not None:
            levels = np.log([float(v) for v in step.vector])
            if np.max(np.abs(self.u[r:] - levels)) > LEVEL_TOL:
                raise OffLevelSet(
                    f"initial point has constants {np.exp(self.u[r:]).tolist()}, "
                    f"reduction assumed {np.exp(levels).tolist()}"
                )
            self.offset = self.offset + self.W[:, r:n] @ levels
            self.W = np.hstack([self.W[:, :r], self.W[:, n:]])
            self.u = self.u[:r]
            return

        sys = self.system
        width = self.W.shape[1]
        first_row = self.W.shape[0]
        reference = np.zeros((r + 1, width))
        reference[:r, :r] = np.eye(r)
        reference[r] = self.W[self.time_row]
        reference_offset = np.concatenate([np.zeros(r), [self.offset[self.time_row]]])
        self.W = np.vstack([self.W, reference])
        self.offset = np.concatenate([self.offset, reference_offset])
        A = as_float_array(sys.A)
        B = as_float_array(sys.B)
        for k in range(r, n):
            self.quadratures.append(
                {
                    "lam": float(sys.lam[k]),
                    "coefficients": A[k],
                    "exponents": B[:, :r],
                    "rows": slice(first_row, first_row + r),
                    "time_row": first_row + r,
                }
            )
        moved = self.W[:, r:n]
        self.W = np.hstack([self.W[:, :r], self.W[:, n:], moved])
        self.q = np.concatenate([self.q, self.u[r:]])
        self.u = self.u[:r]

    def state(self):
        return np.concatenate([self.u, self.q])

    def original_logs(self, state):
        return self.W[: self.n_original] @ state + self.offset[: self.n_original]

    def log_rate(self, state):
        return self.W[self.time_row] @ state + self.offset[self.time_row]

    def quadrature_rhs(self, state):
        rate = self.log_rate(state)
        values = np.empty(len(self.quadratures))
        for i, quad in enumerate(self.quadratures):
            v = self.W[quad["rows"]] @ state + self.offset[quad["rows"]]
            with np.errstate(over="ignore"):
                inner = quad["lam"] + quad["coefficients"] @ np.exp(quad["exponents"] @ v)
                own_rate = self.W[quad["time_row"]] @ state + self.offset[quad["time_row"]]
                scale = np.exp(rate - own_rate)
            values[i] = inner * scale
        return values


def _integral_drift(fi, original, output, original_traj, recast_traj):
    if tuple(fi.over) == tuple(output.var_names) and len(fi.exponents) == output.n:
        return check_conservation(recast_traj, fi)
    if len(fi.exponents) == original.n:
        return check_conservation(original_traj, fi)
    logger.warning(f"skipping integral '{fi.label}': variables {fi.over} not integrated")
    return None


def compare_recast(
    original,
    report,
    x0,
    t_end,
    tol=DEFAULT_TOL,
    method=DEFAULT_METHOD,
    floor=POSITIVITY_FLOOR,
):
    """
    Integrate the original and the recast system from corresponding initial
    points and report max |ln x_original - retrieved ln x| over matched
    physical times, plus the drift of every emitted first integral.
    """
    if report.input != original:
        raise ReplayMismatch("report input differs from the original system")
    mapper = TraceMapper(original, x0).walk(report.trace)
    if mapper.system != report.output:
        raise ReplayMismatch("trace does not reproduce the report output")
    recast = report.output
    n_cur = recast.n
    n_quad = len(mapper.quadratures)
    track_time = mapper.reparametrized
    field_rhs = _log_field(recast)
    P = None
    if report.projection is not None:
        P = as_float_array(report.projection.P)
        retained = report.projection.retained_count

    def rhs(_, y):
        state = y[: n_cur + n_quad]
        parts = [field_rhs(state[:n_cur])]
        if n_quad:
            parts.append(mapper.quadrature_rhs(state))
        if track_time:
            with np.errstate(over="ignore"):
                parts.append([np.exp(mapper.log_rate(state))])
        return np.concatenate(parts)

    y0 = mapper.state()
    events = [_floor_event(n_cur, floor)]
    span_end = float(t_end)
    if track_time:
        y0 = np.concatenate([y0, [0.0]])
        rate0 = float(np.exp(mapper.log_rate(mapper.state())))
        span_end = 4.0 * float(t_end) * max(1.0, 1.0 / rate0)

        def horizon(_, y):
            return y[-1] - float(t_end)

        horizon.terminal = True
        events.append(horizon)

    solution = _solve(rhs, (0.0, span_end), y0, tol, method, events)
    times = solution.y[-1] if track_time else solution.t

    def partial():
        keep = np.concatenate([[True], np.diff(times) > 0])
        return Trajectory(
            times[keep],
            np.exp(solution.y[:n_cur].T[keep]),
            REPARAMETRIZED if track_time else ORIGINAL,
            recast.var_names,
        )

    _raise_for_status(solution, 0, partial)
    recast_traj = partial()
    t_reached = float(recast_traj.times[-1])
    if t_reached < float(t_end) * (1 - 1e-9):
        logger.warning(f"recast reached physical time {t_reached:.6g} of {t_end}")

    original_solution = _solve(
        lambda _, u, f=_log_field(original): f(u),
        (0.0, max(t_reached, float(t_end))),
        _as_log_state(x0, original.n),
        tol,
        method,
        [_floor_event(original.n, floor)],
        dense=True,
    )
    _raise_for_status(
        original_solution,
        0,
        lambda: Trajectory(original_solution.t, np.exp(original_solution.y.T)),
    )

    error = 0.0
    states = solution.y[: n_cur + n_quad].T
    for t, state in zip(times, states):
        if t > t_reached:
            break
        current = state.copy()
        if P is not None:
            current[:n_cur] = P @ current[:n_cur]
            # plain suppression: only the retained block carries the original variables
            current[retained:n_cur] = 0.0
        retrieved = mapper.original_logs(current)
        expected = original_solution.sol(min(t, original_solution.t[-1]))
        error = max(error, float(np.max(np.abs(retrieved - expected))))

    original_traj = Trajectory(original_solution.t, np.exp(original_solution.y.T))
    drifts = []
    for fi in report.first_integrals:
        drift = _integral_drift(fi, original, recast, original_traj, recast_traj)
        if drift is not None:
            drifts.append((fi, drift))
    logger.info(
        f"compare_recast: max log error {error:.3e} over {len(states)} samples, "
        f"{len(drifts)} integrals checked"
    )
    return EquivalenceReport(error, tuple(drifts), t_reached, len(states))
