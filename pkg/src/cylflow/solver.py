"""Time integration of the cylinder flow in conformal gauge.

The evolving metric is ``e^{2w} g0`` and the unnormalised flow
``dg/dt = -R g`` reduces to a single quasilinear heat equation

    w_t = e^{-2w} (Delta0 w - R0 / 2)         ( = -R/2 ),

with the nonlinear Robin condition ``dw/d eta = k0 (e^w - 1)`` that keeps
the boundary geodesic curvature pinned at its initial value.  Boundary
ghosts are eliminated with the centered rule (see geometry.robin_ghosts),
which keeps the whole scheme second order up to the boundary.

Two steppers are provided: Heun (second order, CFL limited - the
validation workhorse) and backward Euler with a damped-growth time step
(first order, unconditionally stable - required for long horizons, where
curvature growth makes ``e^{-2w}`` and hence the explicit CFL collapse).
Both preserve reflection symmetry of symmetric data bit-exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.linalg import solve_banded

from . import geometry
from .errors import SolverError
from .geometry import BaseGeometry, FlowState, ScalarField

try:  # compiled fast path for the explicit loop
    from . import _kernels
except ImportError:  # pragma: no cover - numba unavailable
    _kernels = None

_OK, _REACHED, _STIFF = 0, 1, 2

SCHEMES = ("explicit_heun", "implicit_euler")
STOP_KINDS = ("t_tilde", "normalized_time", "area_below", "wall_steps")
_STOP_CODE = {"t_tilde": 0, "normalized_time": 1, "area_below": 2, "wall_steps": 3}


class StepRejected(SolverError):
    """Newton failed to converge within the iteration budget."""


@dataclass(frozen=True)
class StepperConfig:
    """Time stepping parameters.

    ``dt_min`` defaults to 1e-12 times the initial CFL step.  For the
    implicit scheme the step grows geometrically by ``dt_growth`` per
    accepted step from ``dt_init`` (default: the initial CFL step, or
    1e-4 of the time horizon for t_tilde stop rules, whichever is larger),
    and is halved on a rejected Newton solve.
    """

    scheme: str = "explicit_heun"
    safety: float = 0.25
    newton_tol: float = 1e-12
    newton_max_iter: int = 30
    dt_min: float | None = None
    dt_init: float | None = None
    dt_growth: float = 1.05

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise SolverError(f"unknown scheme {self.scheme!r}; expected one of {SCHEMES}")
        if not 0.0 < self.safety <= 0.5:
            raise SolverError(f"safety must be in (0, 0.5], got {self.safety}")
        if self.dt_min is not None and self.dt_min <= 0:
            raise SolverError(f"dt_min must be positive, got {self.dt_min}")
        if self.dt_growth < 1.0:
            raise SolverError(f"dt_growth must be >= 1, got {self.dt_growth}")


@dataclass(frozen=True)
class StopRule:
    """When to end a run.

    kinds: ``t_tilde`` (unnormalised time target, final step clipped to
    land exactly), ``normalized_time`` (target for the running trapezoid
    of ``Int dt/area``), ``area_below`` (area floor), ``wall_steps``
    (accepted-step budget).
    """

    kind: str
    value: float

    def __post_init__(self):
        if self.kind not in STOP_KINDS:
            raise SolverError(f"unknown stop rule {self.kind!r}; expected one of {STOP_KINDS}")
        if self.value <= 0:
            raise SolverError(f"stop value must be positive, got {self.value}")


@dataclass(frozen=True)
class TraceRecord:
    """Observables of one recorded state of the unnormalised flow."""

    step: int
    t_tilde: float
    dt: float
    area: float
    total_R: float
    R_max: float
    R_min: float
    total_R2: float
    len_minus: float
    len_plus: float
    len_mid: float
    k_minus: float
    k_plus: float
    gb_residual: float
    meridian: float
    argmax_node: int
    rmin_loc: str
    r_boundary: float


OBSERVABLE_FIELDS = (
    "area", "total_R", "R_max", "R_min", "total_R2", "len_minus", "len_plus",
    "len_mid", "k_minus", "k_plus", "gb_residual", "meridian", "argmax_node",
    "rmin_loc", "r_boundary")


@dataclass
class FlowTrace:
    """Time series of TraceRecords produced by one run.

    ``states`` (optional) holds a copy of w at every record time, aligned
    with ``records``.  ``final_normalized_time`` is the stop rule's running
    normalized-time accumulator (populated for normalized_time stops).
    """

    records: list[TraceRecord]
    base: BaseGeometry
    scheme: str
    record_every: int
    stop_kind: str
    stop_value: float
    final_normalized_time: float | None = None
    states: list[np.ndarray] | None = None

    def column(self, name: str) -> np.ndarray:
        vals = [getattr(r, name) for r in self.records]
        if name in ("step", "argmax_node"):
            return np.array(vals, dtype=int)
        if name == "rmin_loc":
            return np.array(vals, dtype=object)
        return np.array(vals, dtype=float)

    def state_at(self, index: int) -> FlowState:
        if self.states is None:
            raise SolverError("trace was recorded without states")
        return FlowState(base=self.base, w=self.states[index],
                         t_tilde=self.records[index].t_tilde)

    def subsample(self, every: int) -> "FlowTrace":
        """Thin the records (keeping the first and last) for
        record-density studies."""
        idx = list(range(0, len(self.records), every))
        if idx[-1] != len(self.records) - 1:
            idx.append(len(self.records) - 1)
        return FlowTrace(
            records=[self.records[i] for i in idx], base=self.base,
            scheme=self.scheme, record_every=self.record_every * every,
            stop_kind=self.stop_kind, stop_value=self.stop_value,
            final_normalized_time=self.final_normalized_time,
            states=None if self.states is None else [self.states[i] for i in idx])


def rhs(state: FlowState) -> ScalarField:
    """Flow velocity of w: ``e^{-2w} (Delta0 w - R0/2)``, i.e. -R/2 with
    the boundary ghosts eliminated through the Robin condition."""
    base = state.base
    ghosts = geometry.robin_ghosts(base, state.w)
    lap = geometry.laplace_base(base, state.w, ghosts)
    return np.exp(-2.0 * state.w) * (lap - 0.5 * base.R0)


def apply_boundary(state: FlowState) -> tuple[float, float]:
    """Ghost values for the current state (see geometry.robin_ghosts)."""
    return geometry.robin_ghosts(state.base, state.w)


def stable_dt(state: FlowState, safety: float = 0.25) -> float:
    """Diffusive CFL limit ``safety h^2 / (2 max(e^{-2w}) (1 + max|f0'/f0| h))``."""
    base = state.base
    max_beta = float(np.max(np.abs(base.beta)))
    diffusion = math.exp(-2.0 * float(np.min(state.w)))
    return safety * base.h * base.h / (2.0 * diffusion * (1.0 + max_beta * base.h))


def step_explicit(state: FlowState, dt: float) -> FlowState:
    """One Heun (second-order) step."""
    if dt <= 0:
        raise SolverError(f"dt must be positive, got {dt}")
    f0 = rhs(state)
    mid = FlowState(base=state.base, w=state.w + dt * f0, t_tilde=state.t_tilde)
    f1 = rhs(mid)
    w_new = state.w + (0.5 * dt) * (f0 + f1)
    return FlowState(base=state.base, w=w_new, t_tilde=state.t_tilde + dt)


def _jacobian_diagonals(base: BaseGeometry, v: np.ndarray, dt: float,
                        F: np.ndarray):
    """Tridiagonal bands of ``I - dt dF/dv`` including the Robin ghosts."""
    n = base.n
    h = base.h
    h2 = h * h
    E = np.exp(-2.0 * v)
    lower = np.zeros(n + 1)   # coefficient on v[i-1] in row i
    upper = np.zeros(n + 1)   # coefficient on v[i+1] in row i
    diag = np.empty(n + 1)

    l_op = np.empty(n + 1)    # d(Delta0 v)_i / d v_i
    l_op[:] = -2.0 / h2
    ev0 = math.exp(v[0])
    evn = math.exp(v[n])
    l_op[0] += 2.0 * base.k0_minus * ev0 / h - base.beta[0] * base.k0_minus * ev0
    l_op[n] += 2.0 * base.k0_plus * evn / h + base.beta[n] * base.k0_plus * evn

    diag[:] = 1.0 - dt * (E * l_op - 2.0 * F)
    lower[1:-1] = -dt * E[1:-1] * (1.0 / h2 - base.beta[1:-1] / (2.0 * h))
    upper[1:-1] = -dt * E[1:-1] * (1.0 / h2 + base.beta[1:-1] / (2.0 * h))
    upper[0] = -dt * E[0] * (2.0 / h2)
    lower[n] = -dt * E[n] * (2.0 / h2)
    return lower, diag, upper


def _solve_tridiagonal(lower, diag, upper, b, fold: bool):
    """Solve the tridiagonal system; ``fold=True`` exploits reflection
    symmetry by solving on half the domain and mirroring, which keeps
    symmetric Newton iterates bit-exactly symmetric."""
    n = diag.size - 1
    if not fold:
        ab = np.zeros((3, n + 1))
        ab[0, 1:] = upper[:-1]
        ab[1, :] = diag
        ab[2, :-1] = lower[1:]
        return solve_banded((1, 1), ab, b)
    m = n // 2
    ab = np.zeros((3, m + 1))
    ab[0, 1:] = upper[:m]
    ab[1, :] = diag[:m + 1]
    ab[2, :m] = lower[1:m + 1]
    ab[2, m - 1] = lower[m] + upper[m]   # middle row: v[m+1] mirrors v[m-1]
    half = solve_banded((1, 1), ab, b[:m + 1])
    return np.concatenate((half, half[-2::-1]))


def step_implicit(state: FlowState, dt: float,
                  config: StepperConfig | None = None) -> FlowState:
    """One backward-Euler step via Newton on the tridiagonal residual
    ``v - w - dt rhs(v) = 0`` (Robin ghosts included in the Jacobian).

    Raises StepRejected when Newton does not reach ``newton_tol`` within
    ``newton_max_iter`` iterations; the driver halves dt and retries.
    """
    if dt <= 0:
        raise SolverError(f"dt must be positive, got {dt}")
    cfg = config or StepperConfig(scheme="implicit_euler")
    base = state.base
    w_old = state.w
    fold = base.symmetric and bool(np.array_equal(w_old, w_old[::-1]))

    v = w_old + dt * rhs(state)   # explicit predictor
    for _ in range(cfg.newton_max_iter):
        F = rhs(FlowState(base=base, w=v, t_tilde=state.t_tilde))
        G = v - w_old - dt * F
        lower, diag, upper = _jacobian_diagonals(base, v, dt, F)
        delta = _solve_tridiagonal(lower, diag, upper, -G, fold)
        v = v + delta
        if float(np.max(np.abs(delta))) <= cfg.newton_tol:
            return FlowState(base=base, w=v, t_tilde=state.t_tilde + dt)
    raise StepRejected(
        f"Newton stalled after {cfg.newton_max_iter} iterations at dt={dt:.3e}")


def _measured_record(state: FlowState, step: int, dt: float) -> TraceRecord:
    base = state.base
    R = geometry.scalar_curvature(state)
    ew = np.exp(2.0 * state.w)
    weights = base.simpson * ew * base.f0
    area = 2.0 * np.pi * float(np.sum(weights))
    total_R = 2.0 * np.pi * float(weights @ R)
    total_R2 = 2.0 * np.pi * float(weights @ (R * R))
    k_minus, k_plus = geometry.boundary_geodesic_curvature(state)
    len_minus = geometry.parallel_length(state, 0)
    len_plus = geometry.parallel_length(state, base.n)
    len_mid = geometry.parallel_length(state, base.middle_index())
    gb = 0.5 * total_R + k_minus * len_minus + k_plus * len_plus
    argmax = int(np.argmax(R))
    rmin_loc = geometry.classify_extremum_location(R, base.n)
    denom = k_minus * len_minus + k_plus * len_plus
    denom_scale = abs(k_minus) * len_minus + abs(k_plus) * len_plus
    k_scale = max(abs(base.k0_minus), abs(base.k0_plus), 1.0)
    if max(abs(k_minus), abs(k_plus)) <= 1e-12 * k_scale \
            or abs(denom) <= 1e-12 * denom_scale:
        r_boundary = math.nan   # undefined for (near) totally geodesic boundary
    else:
        r_boundary = (k_minus * R[0] * len_minus + k_plus * R[base.n] * len_plus) / denom
    return TraceRecord(
        step=step, t_tilde=state.t_tilde, dt=dt, area=area, total_R=total_R,
        R_max=float(np.max(R)), R_min=float(np.min(R)), total_R2=total_R2,
        len_minus=len_minus, len_plus=len_plus, len_mid=len_mid,
        k_minus=k_minus, k_plus=k_plus, gb_residual=gb, meridian=geometry.meridian_distance(state),
        argmax_node=argmax, rmin_loc=rmin_loc, r_boundary=float(r_boundary))


def curvature_evolution_residual(state_prev: FlowState, state_next: FlowState,
                                 dt: float) -> tuple[float, float]:
    """Defect of the curvature evolution law between two consecutive states.

    Interior: ``max | (R_next - R_prev)/dt - (Delta_g R + R^2) |`` with the
    spatial operator evaluated at the midpoint state (centered in time, so
    the check carries no O(dt) bias).  Boundary: ``max | dR/d eta - k R |``
    at the two ends of the midpoint state.  Both vanish under joint
    (h, dt) refinement.
    """
    base = state_prev.base
    w_mid = 0.5 * (state_prev.w + state_next.w)
    mid = FlowState(base=base, w=w_mid,
                    t_tilde=state_prev.t_tilde + 0.5 * dt)
    # Ghost-closed curvature fields: their discretisation error is smooth
    # up to the boundary, so differentiating them again stays second order.
    R_prev = geometry.scalar_curvature(
        state_prev, geometry.robin_ghosts(base, state_prev.w))
    R_next = geometry.scalar_curvature(
        state_next, geometry.robin_ghosts(base, state_next.w))
    R = geometry.scalar_curvature(mid, geometry.robin_ghosts(base, w_mid))
    h = base.h
    n = base.n

    dRdt = (R_next - R_prev) / dt
    lapR = ((R[2:] + R[:-2]) - 2.0 * R[1:-1]) / (h * h) \
        + base.beta[1:-1] * (R[2:] - R[:-2]) / (2.0 * h)
    lap_g = np.exp(-2.0 * w_mid[1:-1]) * lapR
    # Exclude a boundary collar: the ghost closure's local error makes a
    # numerical layer a few nodes wide whose second difference carries an
    # O(h) term; the core defect is the clean second-order signal.  For the
    # time difference, pick states separated by dt of order h (a CFL-sized
    # dt leaves the difference at the rounding floor of R).
    collar = max(4, n // 32)
    defect = dRdt[1:-1] - (lap_g + R[1:-1] ** 2)
    interior = float(np.max(np.abs(defect[collar - 1:n - collar])))

    # The flux identity is a per-state property (no time derivative), so it
    # is evaluated on an actual flow state: the averaged state would break
    # the exact discrete boundary-condition consistency the identity
    # emerges from.
    Rp = R_prev
    wp = state_prev.w
    ds_l = ((4.0 * Rp[1] - 3.0 * Rp[0]) - Rp[2]) / (2.0 * h)
    ds_r = -((4.0 * Rp[n - 1] - 3.0 * Rp[n]) - Rp[n - 2]) / (2.0 * h)
    k_minus, k_plus = geometry.boundary_geodesic_curvature(state_prev)
    flux_l = math.exp(-wp[0]) * (-ds_l)
    flux_r = math.exp(-wp[n]) * ds_r
    boundary = max(abs(flux_l - k_minus * Rp[0]), abs(flux_r - k_plus * Rp[n]))
    return interior, boundary


def _heun_chunk_py(w, t, steps_target, h, beta, r0half, km, kp, f0, simp,
                   dfac, dt_min, stop_kind, stop_value, tnorm, area_prev):
    """Pure-numpy fallback with the same contract as _kernels.heun_chunk."""
    n = w.shape[0] - 1
    done = 0
    last_dt = 0.0

    def rhs_arr(u):
        g_left = u[1] + 2.0 * h * km * math.expm1(u[0])
        g_right = u[n - 1] + 2.0 * h * kp * math.expm1(u[n])
        out = np.empty(n + 1)
        out[1:-1] = ((u[:-2] + u[2:]) - 2.0 * u[1:-1]) / (h * h) \
            + beta[1:-1] * (u[2:] - u[:-2]) / (2.0 * h)
        out[0] = ((g_left + u[1]) - 2.0 * u[0]) / (h * h) \
            + beta[0] * (u[1] - g_left) / (2.0 * h)
        out[n] = ((u[n - 1] + g_right) - 2.0 * u[n]) / (h * h) \
            + beta[n] * (g_right - u[n - 1]) / (2.0 * h)
        return np.exp(-2.0 * u) * (out - r0half)

    def area_of(u):
        return 2.0 * math.pi * float(simp @ (np.exp(2.0 * u) * f0))

    while done < steps_target:
        dt = dfac * math.exp(2.0 * float(np.min(w)))
        if dt < dt_min:
            return t, done, last_dt, _STIFF, tnorm, area_prev
        clipped = False
        if stop_kind == 0 and t + dt >= stop_value:
            dt = stop_value - t
            clipped = True
            if dt <= 0.0:
                return t, done, last_dt, _REACHED, tnorm, area_prev
        f0v = rhs_arr(w)
        f1v = rhs_arr(w + dt * f0v)
        w += (0.5 * dt) * (f0v + f1v)
        t = stop_value if clipped else t + dt
        done += 1
        last_dt = dt
        if stop_kind == 1:
            a = area_of(w)
            tnorm += 0.5 * dt * (1.0 / area_prev + 1.0 / a)
            area_prev = a
            if tnorm >= stop_value:
                return t, done, last_dt, _REACHED, tnorm, area_prev
        elif stop_kind == 2:
            area_prev = area_of(w)
            if area_prev < stop_value:
                return t, done, last_dt, _REACHED, tnorm, area_prev
        elif stop_kind == 0 and clipped:
            return t, done, last_dt, _REACHED, tnorm, area_prev
    return t, done, last_dt, _OK, tnorm, area_prev


def _evolve_explicit(initial, config, stop, record_every, store_states):
    base = initial.base
    chunk_fn = _kernels.heun_chunk if _kernels is not None else _heun_chunk_py
    max_beta = float(np.max(np.abs(base.beta)))
    dfac = config.safety * base.h * base.h / (2.0 * (1.0 + max_beta * base.h))
    dt_min = config.dt_min if config.dt_min is not None \
        else 1e-12 * stable_dt(initial, config.safety)
    code = _STOP_CODE[stop.kind]
    stop_value = stop.value

    w = initial.w.copy()
    t = initial.t_tilde
    steps = 0
    tnorm = 0.0
    area_prev = geometry.area(initial) if code in (1, 2) else 0.0

    records = [_measured_record(initial, 0, 0.0)]
    states = [w.copy()] if store_states else None
    budget = int(stop.value) if stop.kind == "wall_steps" else None
    abort = None

    while True:
        chunk = record_every
        if budget is not None:
            chunk = min(chunk, budget - steps)
            if chunk == 0:
                break
        t, done, last_dt, status, tnorm, area_prev = chunk_fn(
            w, t, chunk, base.h, base.beta, 0.5 * base.R0,
            base.k0_minus, base.k0_plus, base.f0, base.simpson,
            dfac, dt_min, code, stop_value, tnorm, area_prev)
        steps += done
        if done > 0 or status == _STIFF:
            state = FlowState(base=base, w=w.copy(), t_tilde=t)
            records.append(_measured_record(state, steps, last_dt))
            if store_states:
                states.append(w.copy())
        if status == _STIFF:
            abort = (f"explicit CFL step collapsed below dt_min={dt_min:.3e} at "
                     f"t_tilde={t:.6g} (step {steps}); switch scheme to implicit_euler")
            break
        if status == _REACHED:
            break
        if budget is not None and steps >= budget:
            break
    return records, states, steps, t, (tnorm if code == 1 else None), abort


_CURVATURE_DT_CAP = 0.25   # implicit dt <= this fraction of the 1/R_max time scale


def _evolve_implicit(initial, config, stop, record_every, store_states):
    base = initial.base
    dt_min = config.dt_min if config.dt_min is not None \
        else 1e-12 * stable_dt(initial, config.safety)
    if config.dt_init is not None:
        dt = config.dt_init
    elif stop.kind == "t_tilde":
        dt = max(stable_dt(initial, config.safety), 1e-4 * stop.value)
    else:
        dt = stable_dt(initial, config.safety)

    state = initial
    steps = 0
    tnorm = 0.0
    area_prev = geometry.area(initial)
    records = [_measured_record(initial, 0, 0.0)]
    states = [initial.w.copy()] if store_states else None
    budget = int(stop.value) if stop.kind == "wall_steps" else None
    rejects = 0
    done = False
    abort = None

    while not done:
        if budget is not None and steps >= budget:
            break
        dt_try = dt
        # Backward Euler is unconditionally stable but its truncation error
        # scales with dt * R_max, so cap the step at a fraction of the
        # curvature time scale (this also tracks the approach to an
        # extinction time, where 1/R_max -> 0).
        r_max = float(np.max(geometry.scalar_curvature(state)))
        if r_max > 0:
            dt_try = min(dt_try, _CURVATURE_DT_CAP / r_max)
        clipped = False
        if stop.kind == "t_tilde":
            remaining = stop.value - state.t_tilde
            if remaining <= 0:
                break
            if dt_try >= remaining:
                dt_try = remaining
                clipped = True
        if dt_try < dt_min:
            abort = (f"implicit step collapsed below dt_min={dt_min:.3e} at "
                     f"t_tilde={state.t_tilde:.6g}; the flow is approaching "
                     f"extinction (area {area_prev:.3e})")
            break
        try:
            new_state = step_implicit(state, dt_try, config)
        except StepRejected:
            rejects += 1
            dt = 0.5 * dt_try
            if rejects >= 5:
                abort = (f"run aborted: five consecutive Newton rejections near "
                         f"t_tilde={state.t_tilde:.6g} (last dt={dt_try:.3e})")
                break
            continue
        rejects = 0
        if clipped:
            new_state = replace(new_state, t_tilde=stop.value)
        a = geometry.area(new_state)
        tnorm += 0.5 * dt_try * (1.0 / area_prev + 1.0 / a)
        area_prev = a
        state = new_state
        steps += 1
        dt = max(dt, dt_try) * config.dt_growth

        at_record = steps % record_every == 0
        if stop.kind == "t_tilde" and clipped:
            done = True
        elif stop.kind == "normalized_time" and tnorm >= stop.value:
            done = True
        elif stop.kind == "area_below" and a < stop.value:
            done = True
        elif budget is not None and steps >= budget:
            done = True
        if at_record or done:
            records.append(_measured_record(state, steps, dt_try))
            if store_states:
                states.append(state.w.copy())
    if records[-1].step != steps:
        records.append(_measured_record(state, steps, records[-1].dt))
        if store_states:
            states.append(state.w.copy())
    return records, states, steps, state.t_tilde, tnorm, abort


def evolve(initial: FlowState, config: StepperConfig, stop: StopRule,
           record_every: int = 1, store_states: bool = False) -> FlowTrace:
    """Run the flow from ``initial`` until the stop rule fires.

    A TraceRecord is captured at t = 0, every ``record_every`` accepted
    steps, and at the final time.  ``store_states`` additionally keeps a
    copy of w at each record (needed by the snapshot-based checks).
    """
    if record_every < 1:
        raise SolverError(f"record_every must be >= 1, got {record_every}")
    if stop.kind == "wall_steps" and stop.value != int(stop.value):
        raise SolverError(f"wall_steps budget must be an integer, got {stop.value}")

    if config.scheme == "explicit_heun":
        records, states, steps, t, tnorm, abort = _evolve_explicit(
            initial, config, stop, record_every, store_states)
    else:
        records, states, steps, t, tnorm, abort = _evolve_implicit(
            initial, config, stop, record_every, store_states)

    trace = FlowTrace(
        records=records, base=initial.base, scheme=config.scheme,
        record_every=record_every, stop_kind=stop.kind, stop_value=stop.value,
        final_normalized_time=tnorm, states=states)
    if abort is not None:
        raise SolverError(abort, trace=trace)
    return trace
