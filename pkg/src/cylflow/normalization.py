"""Offline rescaling of unnormalised traces to the area-normalised flow.

Only the unnormalised flow is ever integrated; the normalised flow (area
held at ``a_target``) is recovered exactly by per-record rescaling with
``phi = a_target / area`` and the rescaled clock ``t = Int phi d t_tilde``
(trapezoid over the records, so the record density is the accuracy knob of
the time map).  Scaling rules: R by 1/phi, lengths by sqrt(phi), boundary
curvature by 1/sqrt(phi); the total curvature is scale invariant and, with
area a_target, the average scalar curvature is total / a_target.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import geometry
from .analysis import BoundCheck
from .errors import NormalizationError

REQUIRED_SPAN_RATIO = 10.0


@dataclass(frozen=True)
class NormalizedRecord:
    """One record of the normalised flow (plus its source t_tilde)."""

    t_tilde: float
    t: float
    phi: float
    R_max: float
    R_min: float
    r: float              # average scalar curvature = total curvature / a_target
    total_R2: float
    len_minus: float
    len_plus: float
    len_mid: float
    k_minus: float
    k_plus: float
    rmin_loc: str


@dataclass
class NormalizedTrace:
    records: list[NormalizedRecord]
    a_target: float

    def column(self, name: str) -> np.ndarray:
        vals = [getattr(r, name) for r in self.records]
        if name == "rmin_loc":
            return np.array(vals, dtype=object)
        return np.array(vals, dtype=float)


def normalize_trace(trace, a_target: float = 1.0) -> NormalizedTrace:
    """Map a FlowTrace to the normalised flow with area ``a_target``."""
    if a_target <= 0:
        raise NormalizationError(f"a_target must be positive, got {a_target}")
    recs = trace.records
    if not recs:
        raise NormalizationError("empty trace")
    t_tilde = np.array([r.t_tilde for r in recs])
    areas = np.array([r.area for r in recs])
    if np.any(np.diff(t_tilde) <= 0) and len(recs) > 1:
        raise NormalizationError("malformed trace: t_tilde is not strictly increasing")
    if np.any(areas <= 0):
        raise NormalizationError("malformed trace: non-positive area")

    phi = a_target / areas
    t = np.empty_like(phi)
    t[0] = 0.0
    if len(recs) > 1:
        np.cumsum(0.5 * np.diff(t_tilde) * (phi[1:] + phi[:-1]), out=t[1:])

    out = []
    for j, r in enumerate(recs):
        p = phi[j]
        sp = math.sqrt(p)
        out.append(NormalizedRecord(
            t_tilde=r.t_tilde, t=float(t[j]), phi=float(p),
            R_max=r.R_max / p, R_min=r.R_min / p,
            r=r.total_R / a_target,
            total_R2=r.total_R2 / p,
            len_minus=sp * r.len_minus, len_plus=sp * r.len_plus,
            len_mid=sp * r.len_mid,
            k_minus=r.k_minus / sp, k_plus=r.k_plus / sp,
            rmin_loc=r.rmin_loc))
    return NormalizedTrace(records=out, a_target=a_target)


def time_map_bounds_check(trace, tol: float = 1e-9) -> BoundCheck:
    """Check the exact form of the slow-clock inequality linking the two
    time scales.

    With ``M = sup Int R dA`` (attained at t = 0 for admissible data) and
    ``t1 = Int d t_tilde / area``, integrating ``-A'/A <= M/A`` and bounding
    the clock change of variables gives, record by record,

        log(1 + M * t1(t_tilde)) <= M * t_tilde / area(t_tilde).

    This is the constant-explicit version of the logarithmic lower bound on
    t_tilde; the bare gap ``sup [log(1 + t1) - t_tilde]`` is reported in the
    notes.  Requires the positive records to span a factor of 10 in t_tilde.
    """
    recs = trace.records
    t_tilde = np.array([r.t_tilde for r in recs])
    areas = np.array([r.area for r in recs])
    total = np.array([r.total_R for r in recs])

    pos = t_tilde > 0
    if pos.sum() < 2 or t_tilde[pos][-1] / t_tilde[pos][0] < REQUIRED_SPAN_RATIO:
        return BoundCheck(name="time_map_bounds", verdict="inconclusive",
                          constant_found=None, worst_margin=None, window=None,
                          notes="insufficient t_tilde span (need a factor of 10)")

    phi = 1.0 / areas
    t1 = np.empty_like(phi)
    t1[0] = 0.0
    np.cumsum(0.5 * np.diff(t_tilde) * (phi[1:] + phi[:-1]), out=t1[1:])

    M = float(np.max(total))
    if M <= 0:
        # zero total curvature (flat family): the bound degenerates to 0 <= 0
        return BoundCheck(name="time_map_bounds", verdict="pass",
                          constant_found=0.0, worst_margin=0.0, window=(0, len(recs)),
                          notes="total curvature is zero; relation holds trivially")

    lhs = np.log1p(M * t1[pos])
    rhs = M * t_tilde[pos] / areas[pos]
    margins = rhs - lhs
    worst = float(np.min(margins))
    bare_gap = float(np.max(np.log1p(t1[pos]) - t_tilde[pos]))
    passed = worst >= -tol * (1.0 + float(np.max(rhs)))
    return BoundCheck(
        name="time_map_bounds", verdict="pass" if passed else "fail",
        constant_found=M, worst_margin=worst, window=(0, len(recs)),
        notes=f"bare-form gap sup[log(1+t) - t_tilde] = {bare_gap:.3e} "
              f"(negative means the bare relation holds)")


def conformal_factor_residual(trace, states=None, a_target: float = 1.0) -> float:
    """Defect of the pointwise conformal-factor identity along a run.

    In the normalised flow the metric at time t is ``exp(Int_0^t (r - R))``
    times the initial one, pointwise.  Compares that exponential (trapezoid
    in normalised time, R re-evaluated from the stored states) with the
    actual conformal factor ``e^{2(w - w0)} * area(0)/area`` and returns the
    max absolute mismatch over nodes and records.
    """
    if states is None:
        states = trace.states
    if states is None:
        raise NormalizationError("conformal_factor_residual needs stored states")
    recs = trace.records
    if len(states) != len(recs):
        raise NormalizationError("states and records are misaligned")

    ntrace = normalize_trace(trace, a_target)
    t = ntrace.column("t")
    area0 = recs[0].area
    w0 = states[0]

    worst = 0.0
    cum = np.zeros_like(w0)
    prev_integrand = None
    for j, rec in enumerate(recs):
        state = geometry.FlowState(base=trace.base, w=states[j], t_tilde=rec.t_tilde)
        R_norm = geometry.scalar_curvature(state) * (rec.area / a_target)
        integrand = ntrace.records[j].r - R_norm
        if j > 0:
            cum = cum + 0.5 * (t[j] - t[j - 1]) * (integrand + prev_integrand)
        prev_integrand = integrand
        u_state = np.exp(2.0 * (states[j] - w0)) * (area0 / rec.area)
        worst = max(worst, float(np.max(np.abs(u_state - np.exp(cum)))))
    return worst
