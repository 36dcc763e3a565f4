#!/usr/bin/env python3
"""Tour of the background geometry and its closed-form observables.

The round band f0 = cos(sigma) on [-pi/4, pi/4] is a latitude band of the
unit sphere: scalar curvature 2 everywhere, boundary geodesic curvature
-tan(rho) = -1 at both ends, area 2 pi sqrt(2).  Everything below is
computed by the library and compared against those closed forms.
"""

import math

import numpy as np

from cylflow import geometry

rho = math.pi / 4
base = geometry.build_base("cos_band", rho, 256)
state = geometry.zero_state(base)

print("round band, rho = pi/4, n = 256")
print(f"  R0 (constant)        : {base.R0[0]:.15f}   (exact: 2)")
print(f"  k0 at both ends      : {base.k0_plus:.15f}   (exact: -tan(pi/4) = -1)")
print(f"  area                 : {geometry.area(state):.12f}   (exact: 2 pi sqrt2 = {2*math.pi*math.sqrt(2):.12f})")
print(f"  boundary length      : {geometry.parallel_length(state, base.n):.12f}   (exact: pi sqrt2 = {math.pi*math.sqrt(2):.12f})")
print(f"  middle parallel      : {geometry.parallel_length(state, base.middle_index()):.12f}   (exact: 2 pi = {2*math.pi:.12f})")
print(f"  meridian distance    : {geometry.meridian_distance(state):.12f}   (exact: pi/2 = {math.pi/2:.12f})")
print(f"  Gauss-Bonnet residual: {geometry.gauss_bonnet_residual(state):.3e}   (zero for a cylinder)")

# conformal scaling: adding a constant c to w multiplies lengths by e^c,
# areas by e^{2c}, and curvatures by e^{-2c}
c = math.log(2.0)
scaled = geometry.FlowState(base=base, w=np.full(base.n + 1, c))
print("\nhomothety w -> w + ln 2:")
print(f"  area ratio           : {geometry.area(scaled)/geometry.area(state):.12f}   (exact: 4)")
print(f"  length ratio         : {geometry.parallel_length(scaled, 0)/geometry.parallel_length(state, 0):.12f}   (exact: 2)")
print(f"  curvature ratio      : {geometry.scalar_curvature(scaled)[10]/2:.12f}   (exact: 1/4)")

# arclength chart round trip: the conformal metric rewritten as
# ds^2 = d s^2 + f(s)^2 dtheta^2
w = 0.2 * np.cos(base.sigma)
bent = geometry.FlowState(base=base, w=w)
s, f = geometry.to_arclength_profile(bent)
print("\narclength chart of a deformed state:")
print(f"  s range              : [0, {s[-1]:.6f}]  (= meridian distance {geometry.meridian_distance(bent):.6f})")
print(f"  f positive           : {bool(np.all(f > 0))}")
