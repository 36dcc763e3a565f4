"""Background cylinder geometry and observables of conformally deformed metrics.

Grid and conventions
--------------------
The background metric on the cylinder ``S^1 x [-rho, rho]`` is

    g0 = dsigma^2 + f0(sigma)^2 dtheta^2,

sampled at the ``n + 1`` nodes ``sigma_i = rho * (2i - n) / n`` (uniform
spacing ``h = 2 rho / n``; the endpoints and the reflection
``sigma_{n-i} = -sigma_i`` are exact in floating point).  A deformed state
carries a conformal exponent ``w`` per node and represents ``e^{2w} g0``.

All fields are theta-independent, so the Laplace-Beltrami operator of g0
reduces to ``Delta0 u = u_ss + (f0'/f0) u_s`` and surface integrals carry
the measure ``2 pi f0 e^{2w} dsigma``.

Sign conventions: scalar curvature is twice the Gauss curvature,
``R0 = -2 f0''/f0``.  Boundary geodesic curvature is measured against the
outward normal, ``k = (partial f / partial eta) / f``, so the round band
``f0 = cos(sigma)`` has ``k = -tan(rho) < 0`` at both ends.  (The geodesic
curvature of an interior parallel with respect to the +sigma normal is
``f_s / f``, the opposite orientation at the left boundary.)

Area-type integrals use composite Simpson weights (n is required even);
the meridian distance and the arclength chart use the trapezoid rule so
that the two agree exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import GeometryError

# A scalar field is a plain float array with one value per grid node
# (length n + 1).
ScalarField = np.ndarray

PROFILE_KINDS = ("flat", "cos_band")


def _simpson_weights(n: int, h: float) -> np.ndarray:
    w = np.full(n + 1, 2.0)
    w[1::2] = 4.0
    w[0] = w[n] = 1.0
    return w * (h / 3.0)


@dataclass(frozen=True)
class BaseGeometry:
    """Fixed background metric ``g0 = dsigma^2 + f0^2 dtheta^2`` on a grid.

    Profile values and their first two derivatives are analytic (never
    finite-differenced), so ``R0`` is exact at the nodes.  For reflection
    symmetric profiles the stored arrays mirror bit-exactly:
    ``f0[n-i] == f0[i]`` and ``f0_prime[n-i] == -f0_prime[i]``.
    """

    rho: float
    n: int
    h: float
    sigma: np.ndarray
    f0: np.ndarray
    f0_prime: np.ndarray
    f0_second: np.ndarray
    R0: np.ndarray
    k0_minus: float
    k0_plus: float
    beta: np.ndarray          # f0'/f0, the advective coefficient of Delta0
    simpson: np.ndarray       # quadrature weights for d sigma integrals
    symmetric: bool           # bit-exact reflection symmetry of the profile

    def middle_index(self) -> int:
        return self.n // 2


@dataclass(frozen=True)
class FlowState:
    """Conformal exponent ``w`` over the grid at unnormalised time t_tilde.

    Represents the metric ``e^{2w} g0``.  States are value objects: no
    operation in this package mutates ``w`` in place.
    """

    base: BaseGeometry
    w: np.ndarray
    t_tilde: float = 0.0

    def __post_init__(self):
        if self.w.shape != (self.base.n + 1,):
            raise GeometryError(
                f"conformal exponent has {self.w.shape[0]} values, grid has "
                f"{self.base.n + 1} nodes")
        if not np.all(np.isfinite(self.w)):
            bad = int(np.flatnonzero(~np.isfinite(self.w))[0])
            raise GeometryError(f"non-finite conformal exponent at node {bad}")


def _mirror_even(half: np.ndarray, n: int) -> np.ndarray:
    out = np.empty(n + 1)
    m = n // 2
    out[m:] = half
    out[:m] = half[1:][::-1]
    return out


def _mirror_odd(half: np.ndarray, n: int) -> np.ndarray:
    out = np.empty(n + 1)
    m = n // 2
    out[m:] = half
    out[m] = 0.0          # an odd field vanishes at the reflection fixed point
    out[:m] = -half[1:][::-1]
    return out


def build_base(profile_kind: str, rho: float, n: int, a: float = 1.0) -> BaseGeometry:
    """Construct the background geometry for a named profile.

    Supported profiles (both reflection symmetric):

    * ``flat``     -- f0 = 1, a flat cylinder (R0 = 0, k0 = 0).
    * ``cos_band`` -- f0 = cos(a sigma), a round-sphere band with
      R0 = 2 a^2 and k0 = -a tan(a rho); requires ``a * rho < pi/2``.

    The profile tables are evaluated on the nonnegative half of the grid
    and mirrored, so even/odd symmetry holds bit-exactly.
    """
    if rho <= 0:
        raise GeometryError(f"rho must be positive, got {rho}")
    if n < 16:
        raise GeometryError(f"n must be at least 16, got {n}")
    if n % 2:
        raise GeometryError(f"n must be even so the middle parallel is a node, got {n}")

    h = 2.0 * rho / n
    i = np.arange(n + 1)
    sigma = rho * (2.0 * i - n) / n
    m = n // 2
    sig_half = sigma[m:]

    if profile_kind == "flat":
        f0 = np.ones(n + 1)
        f0_prime = np.zeros(n + 1)
        f0_second = np.zeros(n + 1)
    elif profile_kind == "cos_band":
        if not a * rho < np.pi / 2:
            raise GeometryError(
                f"cos_band requires a*rho < pi/2 for positivity, got a*rho={a * rho}")
        f0 = _mirror_even(np.cos(a * sig_half), n)
        f0_prime = _mirror_odd(-a * np.sin(a * sig_half), n)
        f0_second = _mirror_even(-a * a * np.cos(a * sig_half), n)
    else:
        raise GeometryError(
            f"unknown profile kind {profile_kind!r}; expected one of {PROFILE_KINDS}")

    nonpos = np.flatnonzero(f0 <= 0.0)
    if nonpos.size:
        raise GeometryError(
            f"profile is non-positive at node {int(nonpos[0])} "
            f"(sigma={sigma[int(nonpos[0])]:.6g})")

    R0 = -2.0 * f0_second / f0
    beta = f0_prime / f0
    k0_plus = f0_prime[n] / f0[n]
    k0_minus = -f0_prime[0] / f0[0]

    base = BaseGeometry(
        rho=float(rho), n=int(n), h=h, sigma=sigma, f0=f0, f0_prime=f0_prime,
        f0_second=f0_second, R0=R0, k0_minus=float(k0_minus), k0_plus=float(k0_plus),
        beta=beta, simpson=_simpson_weights(n, h), symmetric=True)

    # Conservation sanity at t = 0: the discretisation must reproduce the
    # topological balance of a cylinder (Euler characteristic zero) to
    # quadrature accuracy.
    res = gauss_bonnet_residual(zero_state(base))
    scale = max(abs(total_curvature(zero_state(base))) / 2.0, 1.0)
    tol = 1e-6 * (256.0 / n) ** 2
    if abs(res) > tol * scale:
        raise GeometryError(
            f"background violates Gauss-Bonnet: residual {res:.3e} exceeds "
            f"{tol:.1e} relative")
    return base


def zero_state(base: BaseGeometry) -> FlowState:
    """The undeformed state w = 0 (the metric is g0 itself)."""
    return FlowState(base=base, w=np.zeros(base.n + 1), t_tilde=0.0)


def laplace_base(base: BaseGeometry, u: ScalarField,
                 ghosts: tuple[float, float]) -> ScalarField:
    """Apply ``Delta0 = d^2/dsigma^2 + (f0'/f0) d/dsigma`` with caller ghosts.

    ``ghosts`` supplies the values at the virtual nodes ``sigma_{-1}`` and
    ``sigma_{n+1}``; the centered second-order stencil is then used at every
    node including the boundary.  Pure stencil, no boundary-condition
    assumptions of its own.
    """
    g_left, g_right = ghosts
    h = base.h
    n = base.n
    lap = np.empty(n + 1)
    # Grouped as (left + right) - 2*center so reflection-mirrored inputs
    # produce bit-identical results.
    lap[1:-1] = ((u[2:] + u[:-2]) - 2.0 * u[1:-1]) / (h * h) \
        + base.beta[1:-1] * (u[2:] - u[:-2]) / (2.0 * h)
    lap[0] = ((g_left + u[1]) - 2.0 * u[0]) / (h * h) \
        + base.beta[0] * (u[1] - g_left) / (2.0 * h)
    lap[n] = ((u[n - 1] + g_right) - 2.0 * u[n]) / (h * h) \
        + base.beta[n] * (g_right - u[n - 1]) / (2.0 * h)
    return lap


def robin_ghosts(base: BaseGeometry, w: np.ndarray) -> tuple[float, float]:
    """Ghost values eliminating the fixed-boundary-curvature Robin condition.

    The condition ``dw/d eta = k0 (e^w - 1)`` at each end, discretised with
    the centered difference through the ghost node, gives

        w_{-1}  = w_1     + 2 h k0_minus (e^{w_0} - 1)
        w_{n+1} = w_{n-1} + 2 h k0_plus  (e^{w_n} - 1).
    """
    h = base.h
    g_left = w[1] + 2.0 * h * base.k0_minus * np.expm1(w[0])
    g_right = w[base.n - 1] + 2.0 * h * base.k0_plus * np.expm1(w[base.n])
    return float(g_left), float(g_right)


def _onesided_lap(base: BaseGeometry, u: ScalarField) -> tuple[float, float]:
    """Second-order one-sided Delta0 at the two boundary nodes."""
    h = base.h
    n = base.n
    dss_l = ((2.0 * u[0] - 5.0 * u[1]) + (4.0 * u[2] - u[3])) / (h * h)
    ds_l = ((4.0 * u[1] - 3.0 * u[0]) - u[2]) / (2.0 * h)
    dss_r = ((2.0 * u[n] - 5.0 * u[n - 1]) + (4.0 * u[n - 2] - u[n - 3])) / (h * h)
    ds_r = -((4.0 * u[n - 1] - 3.0 * u[n]) - u[n - 2]) / (2.0 * h)
    return (dss_l + base.beta[0] * ds_l, dss_r + base.beta[n] * ds_r)


def scalar_curvature(state: FlowState,
                     ghosts: tuple[float, float] | None = None) -> ScalarField:
    """Scalar curvature ``R = e^{-2w} (R0 - 2 Delta0 w)`` of ``e^{2w} g0``.

    Interior nodes use the centered stencil.  By default the two boundary
    nodes use second-order one-sided stencils, so the result is a function
    of the state alone (no boundary-condition assumption) and the conformal
    scaling identity ``R(w + c) = e^{-2c} R(w)`` holds at every node to
    rounding.  Passing ``ghosts`` (e.g. from robin_ghosts) switches the
    boundary nodes to the centered ghost closure the time stepper uses,
    which keeps the discretisation error smooth up to the ends - the right
    choice when the field is differentiated again, as in the evolution-law
    residual.
    """
    base = state.base
    w = state.w
    h = base.h
    n = base.n
    lap = np.empty(n + 1)
    lap[1:-1] = ((w[2:] + w[:-2]) - 2.0 * w[1:-1]) / (h * h) \
        + base.beta[1:-1] * (w[2:] - w[:-2]) / (2.0 * h)
    if ghosts is None:
        lap[0], lap[n] = _onesided_lap(base, w)
    else:
        g_left, g_right = ghosts
        lap[0] = ((g_left + w[1]) - 2.0 * w[0]) / (h * h) \
            + base.beta[0] * (w[1] - g_left) / (2.0 * h)
        lap[n] = ((w[n - 1] + g_right) - 2.0 * w[n]) / (h * h) \
            + base.beta[n] * (g_right - w[n - 1]) / (2.0 * h)
    return np.exp(-2.0 * w) * (base.R0 - 2.0 * lap)


def boundary_geodesic_curvature(state: FlowState) -> tuple[float, float]:
    """Measured geodesic curvature ``e^{-w} (k0 + dw/d eta)`` at each end.

    This is the diagnostic value recorded along a run, independent of the
    ghost convention the time stepper uses to impose the boundary
    condition.  The one-sided normal derivative of w is third order so the
    measurement does not dominate the conservation residuals it feeds (the
    state itself carries the scheme's second-order boundary error, which
    is what the drift diagnostics are meant to see).
    """
    base = state.base
    w = state.w
    h = base.h
    n = base.n
    ds_l = ((18.0 * w[1] - 11.0 * w[0]) + (2.0 * w[3] - 9.0 * w[2])) / (6.0 * h)
    ds_r = -((18.0 * w[n - 1] - 11.0 * w[n]) + (2.0 * w[n - 3] - 9.0 * w[n - 2])) / (6.0 * h)
    # outward normal is -sigma at the left end, +sigma at the right end
    k_minus = np.exp(-w[0]) * (base.k0_minus - ds_l)
    k_plus = np.exp(-w[n]) * (base.k0_plus + ds_r)
    return float(k_minus), float(k_plus)


def integrate(state: FlowState, density: ScalarField | float = 1.0) -> float:
    """Integral of a nodal density against the area element of e^{2w} g0."""
    base = state.base
    vals = np.asarray(density) * np.exp(2.0 * state.w) * base.f0
    return 2.0 * np.pi * float(base.simpson @ vals)


def area(state: FlowState) -> float:
    """Total area ``2 pi Int e^{2w} f0 dsigma``."""
    base = state.base
    return 2.0 * np.pi * float(base.simpson @ (np.exp(2.0 * state.w) * base.f0))


def total_curvature(state: FlowState, R: ScalarField | None = None) -> float:
    """Total scalar curvature ``Int R dA`` (scale invariant)."""
    if R is None:
        R = scalar_curvature(state)
    base = state.base
    return 2.0 * np.pi * float(base.simpson @ (R * np.exp(2.0 * state.w) * base.f0))


def parallel_length(state: FlowState, node_index: int) -> float:
    """Length ``2 pi e^{w} f0`` of the parallel through a grid node."""
    base = state.base
    if not 0 <= node_index <= base.n:
        raise GeometryError(f"node index {node_index} outside grid 0..{base.n}")
    return 2.0 * np.pi * float(np.exp(state.w[node_index]) * base.f0[node_index])


def meridian_distance(state: FlowState) -> float:
    """Distance between the two boundary circles, ``Int e^w dsigma``
    (trapezoid, accumulated exactly like the arclength chart so the two
    agree to the last bit)."""
    return float(to_arclength_profile(state)[0][-1])


def gauss_bonnet_residual(state: FlowState) -> float:
    """Signed conservation defect ``Int R/2 dA + Oint k ds`` (exactly zero
    in the continuum since the cylinder has Euler characteristic zero)."""
    base = state.base
    k_minus, k_plus = boundary_geodesic_curvature(state)
    boundary = k_minus * parallel_length(state, 0) + k_plus * parallel_length(state, base.n)
    return 0.5 * total_curvature(state) + boundary


def to_arclength_profile(state: FlowState) -> tuple[np.ndarray, np.ndarray]:
    """Reparametrise to the arclength chart ``ds^2 = d s^2 + f(s)^2 dtheta^2``.

    Returns ``(s_nodes, f_values)`` with ``s`` the cumulative meridian
    arclength (trapezoid, starting at 0) and ``f = e^w f0``.  The last
    entry of ``s_nodes`` equals meridian_distance(state) exactly.
    """
    ew = np.exp(state.w)
    h = state.base.h
    s = np.empty(state.base.n + 1)
    s[0] = 0.0
    np.cumsum(0.5 * h * (ew[1:] + ew[:-1]), out=s[1:])
    return s, ew * state.base.f0


def classify_extremum_location(R: ScalarField, n: int, rel_tol: float = 0.05,
                               collar: int = 2) -> str:
    """Classify where the minimum of a nodal field sits: ``boundary``,
    ``middle``, or ``interior``.

    Tolerant of ties and of the one-sided-stencil noise at the ends: the
    boundary qualifies when the end value is within ``rel_tol`` of the
    minimum relative to the field's spread, or when the argmin sits within
    ``collar`` nodes of an end (the minimum's position is only resolved to
    a few grid spacings).  Constant fields classify as boundary.
    """
    r_min = float(np.min(R))
    spread = float(np.max(R)) - r_min
    slack = rel_tol * spread
    argmin = int(np.argmin(R))
    if min(R[0], R[n]) - r_min <= slack or argmin <= collar or argmin >= n - collar:
        return "boundary"
    if R[n // 2] - r_min <= slack:
        return "middle"
    return "interior"


def parallel_curvature_profile(state: FlowState) -> ScalarField:
    """Geodesic curvature ``f_s / f = e^{-w} (w_sigma + f0'/f0)`` of every
    parallel, with respect to the +sigma normal.

    Centered differences inside, second-order one-sided at the ends; at the
    two boundary nodes this equals the outward-normal geodesic curvature up
    to the orientation flip at the left end.
    """
    base = state.base
    w = state.w
    h = base.h
    n = base.n
    ws = np.empty(n + 1)
    ws[1:-1] = (w[2:] - w[:-2]) / (2.0 * h)
    ws[0] = ((4.0 * w[1] - 3.0 * w[0]) - w[2]) / (2.0 * h)
    ws[n] = -((4.0 * w[n - 1] - 3.0 * w[n]) - w[n - 2]) / (2.0 * h)
    return np.exp(-w) * (ws + base.beta)
