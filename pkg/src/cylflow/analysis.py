"""Turns traces and snapshots into verdicts on the asymptotic claims.

Checkers are deterministic, side-effect-free functions of their inputs and
tolerances.  Each returns a BoundCheck whose verdict is one of

* ``pass`` / ``fail``       -- the stated inequality holds / is violated;
* ``inconclusive``          -- the trace does not span enough time to judge
                               (asymptotic statements need room);
* ``hypotheses-not-met``    -- the run violates the statement's hypotheses,
                               so no verdict applies;
* ``not-applicable``        -- the check requires structure (e.g. symmetry)
                               the input does not have.

The asymptotic claims are existential (some constant makes the bound
true), so checkers estimate the constant from the run and test shape:
boundedness, absence of a growth trend, and rate fits.  "Late window"
always means the last half of the positive-time records in logarithmic
spacing, after dropping the first 10% of records as transient.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_banded

from . import geometry
from .errors import AnalysisError
from .geometry import FlowState, ScalarField

TRANSIENT_DROP = 0.1
MIN_FIT_WINDOW = 10
SPAN_DECADES = 2.0


@dataclass(frozen=True)
class FitResult:
    """Least-squares fit in transformed coordinates.

    Models: ``power`` fits log y vs log t (y = amplitude * t^rate);
    ``log_inverse`` fits 1/y vs log(1+t) (y = amplitude / (log(1+t) +
    amplitude*offset)); ``exponential`` fits log y vs t (y = amplitude *
    exp(rate*t)).  ``rms_residual`` is measured in the transformed
    coordinates.
    """

    model: str
    amplitude: float
    rate: float
    offset: float
    window: tuple[int, int]
    rms_residual: float


@dataclass(frozen=True)
class BoundCheck:
    name: str
    verdict: str
    constant_found: float | None
    worst_margin: float | None
    window: tuple[int, int] | None
    notes: str = ""

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"


def fit_rate(t: np.ndarray, y: np.ndarray, model: str,
             window: tuple[int, int] | None = None) -> FitResult:
    """Fit one decay model on a window of a series (least squares in the
    model's linearising coordinates)."""
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    if window is None:
        window = (0, len(t))
    i0, i1 = window
    ts = t[i0:i1]
    ys = y[i0:i1]
    if len(ts) < MIN_FIT_WINDOW:
        raise AnalysisError(
            f"fit window has {len(ts)} records, need at least {MIN_FIT_WINDOW}")
    if np.any(ys <= 0):
        raise AnalysisError(f"non-positive values in fit window for model {model!r}")

    if model == "power":
        if np.any(ts <= 0):
            raise AnalysisError("power fit needs positive times")
        x, u = np.log(ts), np.log(ys)
    elif model == "log_inverse":
        x, u = np.log1p(ts), 1.0 / ys
    elif model == "exponential":
        x, u = ts, np.log(ys)
    else:
        raise AnalysisError(f"unknown fit model {model!r}")

    slope, intercept = np.polyfit(x, u, 1)
    resid = u - (slope * x + intercept)
    rms = float(np.sqrt(np.mean(resid ** 2)))
    if model == "power":
        out = FitResult("power", float(np.exp(intercept)), float(slope), 0.0, window, rms)
    elif model == "log_inverse":
        amp = float(1.0 / slope) if slope != 0 else math.inf
        out = FitResult("log_inverse", amp, float(slope), float(intercept), window, rms)
    else:
        out = FitResult("exponential", float(np.exp(intercept)), float(slope), 0.0, window, rms)
    if not math.isfinite(out.rms_residual):
        raise AnalysisError(f"non-finite residual in {model} fit")
    return out


def _trimmed_positive(times: np.ndarray) -> np.ndarray:
    """Indices surviving the transient drop and positivity filter."""
    n = len(times)
    start = int(n * TRANSIENT_DROP)
    idx = np.arange(start, n)
    return idx[times[idx] > 0]


def _late_half(times: np.ndarray, idx: np.ndarray) -> np.ndarray:
    """Last half, in log spacing, of the selected records (for the
    unnormalised clock)."""
    lo, hi = times[idx[0]], times[idx[-1]]
    threshold = math.sqrt(lo * hi)
    return idx[times[idx] >= threshold]


def _late_half_log1p(times: np.ndarray, idx: np.ndarray) -> np.ndarray:
    """Last half in log(1+t) spacing (for the normalised clock, whose
    records may start at arbitrarily small positive t)."""
    lt = np.log1p(times[idx])
    threshold = 0.5 * (lt[0] + lt[-1])
    return idx[np.log1p(times[idx]) >= threshold]


def _span_ok(times: np.ndarray, idx: np.ndarray, decades: float = SPAN_DECADES) -> bool:
    if len(idx) < 2 * MIN_FIT_WINDOW:
        return False
    return times[idx[-1]] / times[idx[0]] >= 10.0 ** decades


def check_total_curvature_unnormalized(trace, exponent_range=(-1.3, -0.7)) -> BoundCheck:
    """Is the total curvature bounded by constant / t_tilde?

    Verdict: pass iff the product ``t_tilde * Int R dA`` attains its sup in
    the first (log-spaced) half of the late window (no growth trend) and a
    power fit of the decay over the late window has exponent inside
    ``exponent_range``.  The constant found is the sup of the product.
    """
    name = "total_curvature_unnormalized"
    t = trace.column("t_tilde")
    y = trace.column("total_R")
    idx = _trimmed_positive(t)
    if len(idx) == 0 or np.max(y) <= 0:
        return BoundCheck(name, "inconclusive", None, None, None,
                          "no positive total curvature (flat data)")
    if not _span_ok(t, idx):
        return BoundCheck(name, "inconclusive", None, None, None,
                          f"needs {SPAN_DECADES:g} decades of t_tilde past the transient")
    late = _late_half(t, idx)
    if len(late) < MIN_FIT_WINDOW or np.any(y[late] <= 0):
        return BoundCheck(name, "inconclusive", None, None, None,
                          "late window too short or curvature not positive")
    product = t[late] * y[late]
    sup = float(np.max(product))
    t_at_sup = float(t[late[int(np.argmax(product))]])
    log_lo, log_hi = math.log(t[late[0]]), math.log(t[late[-1]])
    sup_margin = (0.5 * (log_lo + log_hi) - math.log(t_at_sup)) / (log_hi - log_lo)
    fit = fit_rate(t, y, "power", (int(late[0]), int(late[-1]) + 1))
    lo, hi = exponent_range
    exp_margin = min(fit.rate - lo, hi - fit.rate) / (0.5 * (hi - lo))
    worst = min(sup_margin, exp_margin)
    return BoundCheck(
        name, "pass" if worst >= 0 else "fail", sup, worst,
        (int(late[0]), int(late[-1]) + 1),
        f"power exponent {fit.rate:.3f} (target {lo:g}..{hi:g}), "
        f"sup {sup:.4f} at t_tilde={t_at_sup:.4g}")


def check_total_curvature_normalized(ntrace, growth_factor: float = 1.5) -> BoundCheck:
    """Is the normalised total curvature bounded by constant / log(1+t)?

    Verdict: pass iff the product ``log(1+t) * r(t)`` shows no growth trend:
    its max over the late half (log spacing in 1+t) does not exceed
    ``growth_factor`` times its max over the mid half.
    """
    name = "total_curvature_normalized"
    t = ntrace.column("t")
    r = ntrace.column("r")
    idx = _trimmed_positive(t)
    if len(idx) == 0 or np.max(r) <= 0:
        return BoundCheck(name, "inconclusive", None, None, None,
                          "no positive total curvature (flat data)")
    if not _span_ok(t, idx):
        return BoundCheck(name, "inconclusive", None, None, None,
                          "needs more normalized-time span past the transient")
    product = np.log1p(t[idx]) * r[idx]
    lt = np.log1p(t[idx])
    threshold = 0.5 * (lt[0] + lt[-1])
    mid = product[lt < threshold]
    late = product[lt >= threshold]
    if len(late) < MIN_FIT_WINDOW or len(mid) < MIN_FIT_WINDOW:
        return BoundCheck(name, "inconclusive", None, None, None,
                          "split windows too short")
    max_mid, max_late = float(np.max(mid)), float(np.max(late))
    margin = (growth_factor * max_mid - max_late) / (growth_factor * max_mid)
    notes = f"late max {max_late:.4f} vs mid max {max_mid:.4f}"
    pos = idx[r[idx] > 0]
    if len(pos) >= 2 * MIN_FIT_WINDOW:
        late_idx = _late_half_log1p(t, pos)
        win = (int(late_idx[0]), int(late_idx[-1]) + 1)
        try:
            f_li = fit_rate(t, r, "log_inverse", win)
            f_pw = fit_rate(t, r, "power", win)
            f_ex = fit_rate(t, r, "exponential", win)
            notes += (f"; fit rms log_inverse {f_li.rms_residual:.3g}, "
                      f"power {f_pw.rms_residual:.3g}, exponential {f_ex.rms_residual:.3g}")
        except AnalysisError:
            pass
    return BoundCheck(
        name, "pass" if margin >= 0 else "fail",
        float(np.max(product)), margin, (int(idx[0]), int(idx[-1]) + 1), notes)


def check_blowup(trace, ntrace, length_floor: float = 0.0) -> BoundCheck:
    """Curvature blow-up of the unnormalised flow.

    Hypotheses: strictly negative boundary geodesic curvature and
    normalised boundary lengths staying above ``length_floor`` (the
    measured floor is always reported).  Verdict: pass iff, over the late
    window, ``Int R^2 dA`` stays above a positive constant (c1 = its inf),
    ``R_max / t_tilde`` stays above a positive constant (c2 = its inf),
    and R_max is strictly increasing.
    """
    name = "blowup"
    base = trace.base
    if max(base.k0_minus, base.k0_plus) >= 0:
        return BoundCheck(name, "hypotheses-not-met", None, None, None,
                          "needs strictly negative boundary geodesic curvature")
    floor = float(np.min(np.minimum(ntrace.column("len_minus"),
                                    ntrace.column("len_plus"))))
    if floor <= length_floor:
        return BoundCheck(name, "hypotheses-not-met", None, None, None,
                          f"normalized boundary length floor {floor:.4g} "
                          f"not above declared floor {length_floor:g}")
    t = trace.column("t_tilde")
    idx = _trimmed_positive(t)
    if not _span_ok(t, idx):
        return BoundCheck(name, "inconclusive", None, None, None,
                          f"needs {SPAN_DECADES:g} decades of t_tilde "
                          f"(boundary length floor {floor:.4g})")
    late = _late_half(t, idx)
    r_max = trace.column("R_max")[late]
    c1 = float(np.min(trace.column("total_R2")[late]))
    c2 = float(np.min(r_max / t[late]))
    diffs = np.diff(r_max)
    increasing = bool(np.all(diffs > 0))
    margin = min(c1, c2) if increasing else float(np.min(diffs))
    return BoundCheck(
        name, "pass" if (c1 > 0 and c2 > 0 and increasing) else "fail",
        c2, margin, (int(late[0]), int(late[-1]) + 1),
        f"c1={c1:.4g} (inf Int R^2 dA), c2={c2:.4g} (inf R_max/t_tilde), "
        f"boundary length floor {floor:.4g}, "
        f"R_max strictly increasing: {increasing}")


def estimate_c_hat(trace) -> float:
    """Offset for the non-exponential bound, ``-2 / A'(0)``, estimated by
    finite-differencing the area over the first two records."""
    r0, r1 = trace.records[0], trace.records[1]
    slope = (r1.area - r0.area) / (r1.t_tilde - r0.t_tilde)
    if slope >= 0:
        raise AnalysisError("initial area slope is nonnegative; needs R > 0 data")
    return -2.0 / slope


def check_nonexponential(trace, ntrace, tol_rate: float = 0.25,
                         residual_factor: float = 3.0,
                         boundary_fraction: float = 0.95) -> BoundCheck:
    """Convergence of the normalised curvature is slower than exponential.

    Hypothesis monitor: the minimum of R must sit on the boundary for at
    least ``boundary_fraction`` of the records.  Verdict: pass iff
    (a) ``(t + c_hat) * R_max(t) >= 2 (1 - tol_rate)`` over the late
    window, with c_hat estimated from the initial area slope, and
    (b) an exponential fit of R_max is worse than a power fit by at least
    ``residual_factor`` in rms (the decay is genuinely non-exponential).
    """
    name = "nonexponential"
    locs = ntrace.column("rmin_loc")
    frac = float(np.mean(locs == "boundary"))
    if frac < boundary_fraction:
        return BoundCheck(name, "hypotheses-not-met", None, None, None,
                          f"min R on the boundary for only {100 * frac:.1f}% of records")
    try:
        c_hat = estimate_c_hat(trace)
    except AnalysisError as e:
        return BoundCheck(name, "hypotheses-not-met", None, None, None, str(e))
    t = ntrace.column("t")
    r_max = ntrace.column("R_max")
    idx = _trimmed_positive(t)
    if not _span_ok(t, idx):
        return BoundCheck(name, "inconclusive", None, None, None,
                          "needs more normalized-time span")
    late = _late_half_log1p(t, idx)
    if len(late) < MIN_FIT_WINDOW or np.any(r_max[late] <= 0):
        return BoundCheck(name, "inconclusive", None, None, None,
                          "late window too short or R_max not positive")
    product = (t[late] + c_hat) * r_max[late]
    inf_prod = float(np.min(product))
    bound = 2.0 * (1.0 - tol_rate)
    win = (int(late[0]), int(late[-1]) + 1)
    f_exp = fit_rate(t, r_max, "exponential", win)
    f_pow = fit_rate(t, r_max, "power", win)
    ratio = f_exp.rms_residual / f_pow.rms_residual if f_pow.rms_residual > 0 else math.inf
    margin = min((inf_prod - bound) / bound, (ratio - residual_factor) / residual_factor)
    return BoundCheck(
        name, "pass" if margin >= 0 else "fail", c_hat, margin, win,
        f"inf (t+c_hat) R_max = {inf_prod:.4f} (bound {bound:g}), "
        f"exponential/power fit rms ratio {ratio:.2f} (need >= {residual_factor:g})")


def _snapshot_bound(state: FlowState):
    """Common quantities of the two sandwich checks: half meridian length,
    curvature floor alpha, parallel-curvature bound C, and the exponent
    B = 2 rho (alpha rho + C)."""
    R = geometry.scalar_curvature(state)
    alpha = max(0.0, -float(np.min(R)))
    C = float(np.max(np.abs(geometry.parallel_curvature_profile(state))))
    rho_s = 0.5 * geometry.meridian_distance(state)
    return alpha, C, rho_s, 2.0 * rho_s * (alpha * rho_s + C)


def check_parallel_bounds(state: FlowState, tol: float = 1e-12) -> BoundCheck:
    """Sandwich bound between the lengths of any two parallels.

    With alpha, C, and the half meridian length rho taken from the same
    snapshot, every pair of parallels satisfies
    ``L_q <= L_s * exp(2 rho (alpha rho + C))`` (and the reverse), so a
    failure indicates a discretisation bug, not geometry.
    ``worst_margin`` is the smallest slack in log space.
    """
    _, f = geometry.to_arclength_profile(state)
    alpha, C, rho_s, B = _snapshot_bound(state)
    spread = float(np.log(np.max(f)) - np.log(np.min(f)))
    margin = B - spread
    return BoundCheck(
        "parallel_bounds", "pass" if margin >= -tol * (1.0 + B) else "fail",
        B, margin, None,
        f"alpha={alpha:.4g}, C={C:.4g}, rho={rho_s:.4g}, "
        f"log length spread {spread:.4g}")


def check_area_bounds(state: FlowState, tol: float = 1e-12) -> BoundCheck:
    """Sandwich bound pinning the area to the shortest boundary length:
    ``2 rho L e^{-B} <= A <= 2 rho L e^{B}`` with B as in the parallel
    check."""
    alpha, C, rho_s, B = _snapshot_bound(state)
    A = geometry.area(state)
    L = min(geometry.parallel_length(state, 0),
            geometry.parallel_length(state, state.base.n))
    log_mid = math.log(2.0 * rho_s * L)
    log_a = math.log(A)
    margin = min(log_a - (log_mid - B), (log_mid + B) - log_a)
    return BoundCheck(
        "area_bounds", "pass" if margin >= -tol * (1.0 + B + abs(log_a)) else "fail",
        B, margin, None,
        f"area {A:.6g}, min boundary length {L:.6g}, half meridian {rho_s:.4g}")


def middle_parallel_identity(ntrace) -> float:
    """Residual of the middle-parallel length identity
    ``L(t) = L(0) exp( (1/2) Int_0^t (r - R_max) )`` in the normalised
    flow, relative to L(0).  Trapezoid in normalised time, so the residual
    is quadratic in the record spacing."""
    t = ntrace.column("t")
    L = ntrace.column("len_mid")
    integrand = ntrace.column("r") - ntrace.column("R_max")
    cum = np.concatenate((
        [0.0], np.cumsum(0.5 * np.diff(t) * (integrand[1:] + integrand[:-1]))))
    pred = L[0] * np.exp(0.5 * cum)
    return float(np.max(np.abs(L - pred)) / L[0])


def check_decreasing_from_middle(trace, ntrace, states=None,
                                 tie_rtol: float = 1e-9,
                                 ineq_tol: float = 1e-6,
                                 late_fraction: float = 0.1) -> BoundCheck:
    """Propagation of the symmetric, middle-peaked profile along a run.

    Requires stored states of a reflection-symmetric run; verifies at every
    record that the maximum of R sits at the middle parallel (ties within
    ``tie_rtol`` count, so constant-curvature data passes) and that R is
    non-increasing from the middle toward both ends; that the discrete
    ``dR_max/dt <= R_max (R_max - r) + ineq_tol`` holds at every record
    pair of the normalised flow; and that ``Int (R_max - r) dt`` has
    stopped accumulating (late increments below ``late_fraction`` of the
    early total).  The middle-parallel identity residual is reported in
    the notes.
    """
    name = "decreasing_from_middle"
    if states is None:
        states = trace.states
    if states is None:
        raise AnalysisError("check_decreasing_from_middle needs stored states")
    base = trace.base
    if not (base.symmetric and np.array_equal(states[0], states[0][::-1])):
        return BoundCheck(name, "not-applicable", None, None, None,
                          "initial data is not reflection symmetric")
    mid = base.middle_index()

    def profile_margins(w, t_tilde):
        state = FlowState(base=base, w=w, t_tilde=t_tilde)
        R = geometry.scalar_curvature(state)
        scale = max(float(np.max(np.abs(R))), 1e-300)
        am = (R[mid] - float(np.max(R))) / scale + tie_rtol
        right = np.diff(R[mid:])
        left = np.diff(R[mid::-1])
        worst_step = float(min(np.min(-right, initial=math.inf),
                               np.min(-left, initial=math.inf)))
        return am, (worst_step + tie_rtol * scale) / scale

    # The statement presumes data whose curvature is non-increasing from
    # the middle parallel; if the initial profile is outside that class the
    # preservation claim does not apply.
    am0, mm0 = profile_margins(states[0], trace.records[0].t_tilde)
    if min(am0, mm0) < 0:
        return BoundCheck(name, "not-applicable", None, None, None,
                          "initial curvature is not decreasing from the middle")

    argmax_margin = am0
    mono_margin = mm0
    for j, w in enumerate(states[1:], start=1):
        am, mm = profile_margins(w, trace.records[j].t_tilde)
        argmax_margin = min(argmax_margin, am)
        mono_margin = min(mono_margin, mm)

    t = ntrace.column("t")
    r_max = ntrace.column("R_max")
    r = ntrace.column("r")
    dt = np.diff(t)
    lhs = np.diff(r_max) / dt
    # The differential inequality bounds the mean slope over a record pair
    # by the sup of the right-hand side over the interval, approximated by
    # the larger endpoint value.
    rhs_nodes = r_max * (r_max - r)
    rhs = np.maximum(rhs_nodes[1:], rhs_nodes[:-1])
    ineq_margin = float(np.min(rhs + ineq_tol - lhs))

    integrand = r_max - r
    cum = np.concatenate((
        [0.0], np.cumsum(0.5 * dt * (integrand[1:] + integrand[:-1]))))
    # The tail-share criterion is meaningful only once the accumulation has
    # entered its decaying phase: compare increments over the last two
    # log-spaced quarters of the run.
    lt = np.log1p(t)
    q50 = min(max(int(np.searchsorted(lt, 0.50 * (lt[0] + lt[-1]))), 1), len(cum) - 1)
    q75 = min(max(int(np.searchsorted(lt, 0.25 * lt[0] + 0.75 * lt[-1])), q50), len(cum) - 1)
    inc3 = float(cum[q75] - cum[q50])
    inc4 = float(cum[-1] - cum[q75])
    # demand a decaying accumulation AND at least an e-fold of normalised
    # time, otherwise a short window cannot speak to boundedness
    tail_evaluable = float(cum[-1]) > 0 and inc4 < inc3 and t[-1] >= 1.0
    if tail_evaluable:
        early_total = float(cum[q50])
        late_sum = float(cum[-1] - cum[q50])
        tail_margin = (late_fraction * early_total - late_sum) \
            / max(late_fraction * early_total, 1e-300) if early_total > 0 else 1.0
        tail_note = f"late share margin {tail_margin:.3g}"
    else:
        tail_margin = math.inf
        tail_note = "late share not evaluable (run still accumulating)"

    identity_res = middle_parallel_identity(ntrace)
    worst = min(argmax_margin, mono_margin, ineq_margin, tail_margin)
    if worst < 0:
        verdict = "fail"
    elif not tail_evaluable:
        verdict = "inconclusive"
        worst = min(argmax_margin, mono_margin, ineq_margin)
    else:
        verdict = "pass"
    return BoundCheck(
        name, verdict,
        float(cum[-1]), worst, (0, len(states)),
        f"argmax margin {argmax_margin:.3g}, monotone margin {mono_margin:.3g}, "
        f"dR_max/dt inequality margin {ineq_margin:.3g}, "
        f"Int(R_max - r) = {cum[-1]:.4f} with {tail_note}, "
        f"middle-parallel identity residual {identity_res:.3e}")


def _potential_system(state: FlowState):
    """Flux-form discretisation of ``Delta_g f = R - r`` with zero-flux
    ends.  Returns the tridiagonal bands (scaled by the conformal area
    weight), the right-hand side, the flux average r, and the node weights
    of the compatibility constraint."""
    base = state.base
    n = base.n
    h = base.h
    R = geometry.scalar_curvature(state)
    ew = np.exp(2.0 * state.w)
    c_half = 0.5 * (base.f0[1:] + base.f0[:-1])   # profile at cell faces

    vol = np.full(n + 1, h)
    vol[0] = vol[n] = 0.5 * h
    dens = ew * base.f0
    r_flux = float(np.sum(vol * dens * R) / np.sum(vol * dens))
    b = dens * (R - r_flux)

    lower = np.zeros(n + 1)
    diag = np.zeros(n + 1)
    upper = np.zeros(n + 1)
    inv_h2 = 1.0 / (h * h)
    diag[1:-1] = -(c_half[1:] + c_half[:-1]) * inv_h2
    lower[1:-1] = c_half[:-1] * inv_h2
    upper[1:-1] = c_half[1:] * inv_h2
    diag[0] = -2.0 * c_half[0] * inv_h2
    upper[0] = 2.0 * c_half[0] * inv_h2
    diag[n] = -2.0 * c_half[-1] * inv_h2
    lower[n] = 2.0 * c_half[-1] * inv_h2
    return lower, diag, upper, b, r_flux, vol * dens


def solve_potential(state: FlowState) -> ScalarField:
    """Potential of the curvature imbalance: solves ``Delta_g f = R - r``
    with zero normal flux and the weighted mean of f removed (r is the
    area average of R on this snapshot, so the system is compatible)."""
    base = state.base
    n = base.n
    lower, diag, upper, b, _, weights = _potential_system(state)
    # Constants span the null space; pin f[n] = 0, solve the remaining
    # rows (the dropped row is implied by compatibility), then recenter.
    ab = np.zeros((3, n))
    ab[0, 1:] = upper[:n - 1]
    ab[1, :] = diag[:n]
    ab[2, :-1] = lower[1:n]
    f = np.empty(n + 1)
    f[:n] = solve_banded((1, 1), ab, b[:n])
    f[n] = 0.0
    f -= np.sum(weights * f) / np.sum(weights)
    return f


def potential_residual(state: FlowState, f: ScalarField | None = None) -> float:
    """Direct-substitution defect of the potential solve: plug f back into
    the discrete operator and compare with the right-hand side.

    Measured relative to ``max(|rhs|, |diag * f|)``, the normwise
    backward-error scale: on constant-curvature snapshots the right-hand
    side vanishes and a bare division would turn rounding noise into a
    spurious figure.
    """
    if f is None:
        f = solve_potential(state)
    lower, diag, upper, b, r_flux, _ = _potential_system(state)
    Af = diag * f
    Af[:-1] += upper[:-1] * f[1:]
    Af[1:] += lower[1:] * f[:-1]
    base = state.base
    dens = np.exp(2.0 * state.w) * base.f0
    R = geometry.scalar_curvature(state)
    # Floor at a fraction of the data magnitude: on constant-curvature
    # snapshots R - r cancels to rounding and a bare ratio would compare
    # noise with noise.
    scale = max(float(np.max(np.abs(b))),
                1e-3 * float(np.max(dens * (np.abs(R) + abs(r_flux)))), 1e-300)
    return float(np.max(np.abs(Af - b)) / scale)


def h_monitor(state: FlowState) -> float:
    """Max over nodes of ``Delta_g f + |grad f|^2`` for the curvature
    potential f (the quantity whose boundedness drives the interior
    curvature bound)."""
    base = state.base
    n = base.n
    h = base.h
    f = solve_potential(state)
    R = geometry.scalar_curvature(state)
    ew2 = np.exp(-2.0 * state.w)
    _, _, _, b, r_flux, _ = _potential_system(state)
    lap_g = R - r_flux   # by construction of f, up to the solve residual
    fs = np.empty(n + 1)
    fs[1:-1] = (f[2:] - f[:-2]) / (2.0 * h)
    fs[0] = ((4.0 * f[1] - 3.0 * f[0]) - f[2]) / (2.0 * h)
    fs[n] = -((4.0 * f[n - 1] - 3.0 * f[n]) - f[n - 2]) / (2.0 * h)
    return float(np.max(lap_g + ew2 * fs ** 2))


def boundary_average_curvature(state: FlowState) -> float:
    """Boundary average of R weighted by geodesic curvature,
    ``Oint k R ds / Oint k ds``; NaN when the boundary is totally geodesic
    (the average is undefined there)."""
    base = state.base
    k_minus, k_plus = geometry.boundary_geodesic_curvature(state)
    R = geometry.scalar_curvature(state)
    l_minus = geometry.parallel_length(state, 0)
    l_plus = geometry.parallel_length(state, base.n)
    denom = k_minus * l_minus + k_plus * l_plus
    denom_scale = abs(k_minus) * l_minus + abs(k_plus) * l_plus
    k_scale = max(abs(base.k0_minus), abs(base.k0_plus), 1.0)
    if max(abs(k_minus), abs(k_plus)) <= 1e-12 * k_scale \
            or abs(denom) <= 1e-12 * denom_scale:
        return math.nan
    return (k_minus * R[0] * l_minus + k_plus * R[base.n] * l_plus) / denom


# ---------------------------------------------------------------------------
# Run-level conservation checks (solver invariants measured on a trace).

REF_H = (math.pi / 2.0) / 256.0   # grid spacing of the reference resolution


def check_gauss_bonnet(trace, rel_tol: float | None = None,
                       growth_factor: float = 5.0) -> BoundCheck:
    """Gauss-Bonnet conservation along a run: the relative residual stays
    below ``rel_tol`` (default 1e-5 scaled by (h/h_ref)^2) and the absolute
    residual never exceeds ``growth_factor`` times its t = 0 value."""
    base = trace.base
    if rel_tol is None:
        rel_tol = 1e-5 * (base.h / REF_H) ** 2
    gb = trace.column("gb_residual")
    total = trace.column("total_R")
    k_term = trace.column("k_minus") * trace.column("len_minus") \
        + trace.column("k_plus") * trace.column("len_plus")
    scale = np.maximum(np.abs(total) / 2.0, np.abs(k_term))
    rel = np.divide(np.abs(gb), scale, out=np.zeros_like(gb), where=scale > 0)
    worst_rel = float(np.max(rel))
    # The t = 0 residual of unperturbed data is pure quadrature error
    # (orders below the stencil error of any evolved state), so the growth
    # cap gets a floor at the generic O(h^2) conservation level.
    floor = 1e-6 * (base.h / REF_H) ** 2 * max(scale[0], 1.0)
    cap = growth_factor * max(abs(gb[0]), floor)
    worst_abs = float(np.max(np.abs(gb)))
    margin = min((rel_tol - worst_rel) / rel_tol, (cap - worst_abs) / cap)
    return BoundCheck(
        "gauss_bonnet", "pass" if margin >= 0 else "fail",
        worst_rel, margin, (0, len(gb)),
        f"worst relative residual {worst_rel:.3e} (tol {rel_tol:.1e}), "
        f"worst absolute {worst_abs:.3e} vs {growth_factor:g} x initial {abs(gb[0]):.3e}")


def check_boundary_preservation(trace, tol: float | None = None) -> BoundCheck:
    """The measured boundary geodesic curvature stays at its initial value
    (tolerance of order h^2; default 5e-4 scaled by (h/h_ref)^2)."""
    base = trace.base
    k_scale = max(abs(base.k0_minus), abs(base.k0_plus), 1.0)
    if tol is None:
        tol = 5e-4 * (base.h / REF_H) ** 2 * k_scale
    drift = np.maximum(np.abs(trace.column("k_minus") - base.k0_minus),
                       np.abs(trace.column("k_plus") - base.k0_plus))
    worst = float(np.max(drift))
    margin = (tol - worst) / tol
    return BoundCheck(
        "boundary_condition_drift", "pass" if margin >= 0 else "fail",
        worst, margin, (0, len(drift)),
        f"worst |k - k0| = {worst:.3e} (tol {tol:.1e})")


def check_positivity(trace, tol: float | None = None) -> BoundCheck:
    """Nonnegative curvature is preserved: min R stays above ``-tol``
    (default 1e-8 times the initial max R, shrinking with h^2)."""
    r0_max = trace.records[0].R_max
    if tol is None:
        tol = 1e-8 * max(r0_max, 0.0)
    worst = float(np.min(trace.column("R_min")))
    margin = worst + tol
    return BoundCheck(
        "positivity", "pass" if margin >= 0 else "fail",
        worst, margin, (0, len(trace.records)),
        f"min R over run {worst:.3e} (tol -{tol:.1e})")


def check_monotone_total_curvature(trace, rtol: float = 1e-10) -> BoundCheck:
    """Total curvature is non-increasing along the unnormalised flow for
    admissible data."""
    total = trace.column("total_R")
    scale = max(float(np.max(np.abs(total))), 1e-300)
    rises = np.diff(total)
    worst = float(np.max(rises, initial=-math.inf))
    margin = (rtol * scale - worst) / scale
    return BoundCheck(
        "monotone_total_curvature", "pass" if margin >= 0 else "fail",
        float(total[0]), margin, (0, len(total)),
        f"largest increase between records {worst:.3e}")


def check_area_law(trace, rel_tol: float | None = None) -> BoundCheck:
    """Record-level area balance ``dA/dt = -Int R dA``: the trapezoid of
    the recorded total curvature must account for the area drop between
    consecutive records."""
    if rel_tol is None:
        # backward Euler is first order, so its per-record balance carries
        # an O(dt) bias; the explicit records must match to trapezoid order
        rel_tol = 1e-3 if trace.scheme == "explicit_heun" else 0.15
    t = trace.column("t_tilde")
    A = trace.column("area")
    total = trace.column("total_R")
    dt = np.diff(t)
    defect = np.abs(np.diff(A) + 0.5 * dt * (total[1:] + total[:-1]))
    scale = np.maximum(np.abs(np.diff(A)), np.abs(dt * total[:-1]))
    scale = np.maximum(scale, 1e-15 * A[0])
    worst = float(np.max(defect / scale)) if len(defect) else 0.0
    margin = (rel_tol - worst) / rel_tol
    return BoundCheck(
        "area_law", "pass" if margin >= 0 else "fail",
        worst, margin, (0, len(A)),
        f"worst relative defect {worst:.3e} (tol {rel_tol:.1e})")


def check_symmetry_preservation(trace) -> BoundCheck:
    """Reflection-symmetric data must stay symmetric to the last bit."""
    if trace.states is None:
        raise AnalysisError("check_symmetry_preservation needs stored states")
    if not (trace.base.symmetric and np.array_equal(trace.states[0], trace.states[0][::-1])):
        return BoundCheck("symmetry_preservation", "not-applicable",
                          None, None, None, "initial data is not symmetric")
    worst = max(float(np.max(np.abs(w - w[::-1]))) for w in trace.states)
    return BoundCheck(
        "symmetry_preservation", "pass" if worst == 0.0 else "fail",
        worst, -worst, (0, len(trace.states)),
        f"max |w - reflected w| = {worst:.3e} (must be exactly 0)")


def check_total_curvature_ode(trace, rel_tol: float = 0.05) -> BoundCheck:
    """Cross-check of the boundary-average identity
    ``d/dt log Int R dA = -r_boundary / 2`` at interior records (centered
    differences; accurate to record spacing squared plus h^2)."""
    t = trace.column("t_tilde")
    total = trace.column("total_R")
    rb = trace.column("r_boundary")
    if np.any(np.isnan(rb)) or np.any(total <= 0) or len(t) < 3:
        return BoundCheck("total_curvature_ode", "inconclusive", None, None, None,
                          "undefined boundary average (k = 0) or non-positive totals")
    log_i = np.log(total)
    deriv = (log_i[2:] - log_i[:-2]) / (t[2:] - t[:-2])
    target = -0.5 * rb[1:-1]
    scale = np.maximum(np.abs(target), 1e-2 * np.max(np.abs(target)))
    worst = float(np.max(np.abs(deriv - target) / scale))
    margin = (rel_tol - worst) / rel_tol
    return BoundCheck(
        "total_curvature_ode", "pass" if margin >= 0 else "fail",
        worst, margin, (1, len(t) - 1),
        f"worst relative mismatch {worst:.3e} (tol {rel_tol:g})")
