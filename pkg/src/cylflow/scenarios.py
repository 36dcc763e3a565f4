"""Initial-data families and numerical validation of their hypotheses.

The asymptotic statements this package checks assume nonnegative scalar
curvature, nonpositive boundary geodesic curvature, and (for the refined
results) reflection symmetry with curvature non-increasing from the middle
parallel outward.  Scenarios construct such data; ``validate_hypotheses``
measures whether a given state actually satisfies it.

Perturbations enter through the initial conformal exponent w0, never
through the profile, so one background geometry (with its analytic
derivative tables) serves a whole family.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import geometry
from .errors import ScenarioError
from .geometry import BaseGeometry, FlowState

W0_KINDS = ("zero", "cosine_bump")


@dataclass(frozen=True)
class ScenarioSpec:
    """Parameters of one initial-data family member.

    ``cosine_bump`` sets ``w0 = epsilon * cos(mode * pi * (sigma + rho) / (2 rho))``,
    which has zero normal derivative at both ends.  On a flat profile this
    makes the data exactly compatible with the boundary condition at t = 0;
    on a curved band the compatibility defect is O(epsilon) and shows up as
    a short boundary transient.  Even modes are reflection symmetric, odd
    modes antisymmetric.
    """

    profile_kind: str = "cos_band"
    a: float = 1.0
    rho: float = np.pi / 4
    n: int = 128
    w0_kind: str = "zero"
    epsilon: float = 0.0
    mode: int = 1

    def __post_init__(self):
        if self.profile_kind not in geometry.PROFILE_KINDS:
            raise ScenarioError(f"unknown profile kind {self.profile_kind!r}")
        if self.w0_kind not in W0_KINDS:
            raise ScenarioError(f"unknown w0 kind {self.w0_kind!r}")
        if self.profile_kind == "cos_band" and not self.a * self.rho < np.pi / 2:
            raise ScenarioError(
                f"profile positivity needs a*rho < pi/2, got {self.a * self.rho}")
        if self.epsilon < 0:
            raise ScenarioError(f"epsilon must be nonnegative, got {self.epsilon}")
        if self.mode < 1:
            raise ScenarioError(f"mode must be a positive integer, got {self.mode}")


@dataclass(frozen=True)
class Tolerances:
    """Tolerances for the hypothesis flags (all relative to max |R|)."""

    sign_tol: float = 1e-10        # slack for R >= 0 and k <= 0
    symmetry_rtol: float = 1e-10
    monotone_rtol: float = 1e-10   # non-strict "decreasing from the middle"


@dataclass(frozen=True)
class HypothesisReport:
    r_nonneg: bool
    k_nonpos: bool
    reflection_symmetric: bool
    decreasing_from_middle: bool
    min_R_location: str   # "boundary" | "interior" | "middle"


def make_initial(spec: ScenarioSpec) -> FlowState:
    """Build the background geometry and initial state for a scenario.

    Deterministic: identical specs produce bit-identical states.  The
    returned state's ``base`` attribute carries the BaseGeometry.
    """
    base = geometry.build_base(spec.profile_kind, spec.rho, spec.n, a=spec.a)
    n = spec.n
    if spec.w0_kind == "zero" or spec.epsilon == 0.0:
        w0 = np.zeros(n + 1)
    else:
        # Evaluate on the nonnegative half grid and mirror with the parity
        # of the mode, so symmetric bumps are bit-exactly symmetric.
        m = n // 2
        sig_half = base.sigma[m:]
        phase = spec.mode * np.pi * (sig_half + spec.rho) / (2.0 * spec.rho)
        half = spec.epsilon * np.cos(phase)
        if spec.mode % 2 == 0:
            w0 = geometry._mirror_even(half, n)
        else:
            w0 = geometry._mirror_odd(half, n)
    return FlowState(base=base, w=w0, t_tilde=0.0)


def validate_hypotheses(state: FlowState, tol: Tolerances = Tolerances()) -> HypothesisReport:
    """Measure the theorem hypotheses on a state.

    ``decreasing_from_middle`` is true iff R is non-increasing from the
    middle node toward both ends under a tolerance-relaxed pairwise
    comparison (a constant field counts as non-increasing);
    ``reflection_symmetric`` iff |R(sigma) - R(-sigma)| <= tol * max|R|.
    ``min_R_location`` classifies the (smallest-index) argmin.
    """
    R = geometry.scalar_curvature(state)
    scale = float(np.max(np.abs(R)))
    n = state.base.n
    mid = state.base.middle_index()

    k_minus, k_plus = geometry.boundary_geodesic_curvature(state)
    k_scale = max(abs(state.base.k0_minus), abs(state.base.k0_plus), 1.0)

    r_nonneg = bool(np.min(R) >= -tol.sign_tol * max(scale, 1.0))
    k_nonpos = bool(max(k_minus, k_plus) <= tol.sign_tol * k_scale)
    reflection_symmetric = bool(
        np.max(np.abs(R - R[::-1])) <= tol.symmetry_rtol * scale)

    slack = tol.monotone_rtol * scale
    right = R[mid:]
    left = R[mid::-1]   # middle outward toward node 0
    decreasing = bool(np.all(np.diff(right) <= slack) and np.all(np.diff(left) <= slack))

    loc = geometry.classify_extremum_location(R, n)

    return HypothesisReport(
        r_nonneg=r_nonneg, k_nonpos=k_nonpos,
        reflection_symmetric=reflection_symmetric,
        decreasing_from_middle=decreasing, min_R_location=loc)
