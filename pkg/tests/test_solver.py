"""Time stepping: right-hand side, boundary ghosts, steppers, evolution."""

import math

import numpy as np
import pytest

from cylflow import geometry, normalization, solver
from cylflow.errors import SolverError
from cylflow.geometry import FlowState, build_base, zero_state
from cylflow.solver import (StepRejected, StepperConfig, StopRule, evolve,
                            stable_dt, step_explicit, step_implicit)

PI = np.pi


class TestRhs:
    def test_flat_is_stationary(self, flat_base):
        assert np.all(solver.rhs(zero_state(flat_base)) == 0.0)

    def test_sphere_band_initial_velocity(self, sphere_base):
        # R0 = 2 exactly, zero ghosts: rhs = -R0/2 = -1 at every node
        assert np.all(solver.rhs(zero_state(sphere_base)) == -1.0)

    def test_scaled_band_interior(self, sphere_base):
        c = 0.3
        state = FlowState(base=sphere_base, w=np.full(sphere_base.n + 1, c))
        r = solver.rhs(state)
        expected = -math.exp(-2 * c)
        assert np.max(np.abs(r[1:-1] - expected)) < 1e-13


class TestApplyBoundary:
    def test_zero_state_mirrors(self, sphere_base):
        g_left, g_right = solver.apply_boundary(zero_state(sphere_base))
        assert g_left == 0.0 and g_right == 0.0

    def test_geodesic_boundary_is_neumann(self, flat_base):
        w = 0.2 * np.cos(flat_base.sigma)
        g_left, g_right = solver.apply_boundary(FlowState(base=flat_base, w=w))
        assert g_left == w[1] and g_right == w[flat_base.n - 1]

    def test_robin_elimination_value(self, sphere_base):
        w = np.full(sphere_base.n + 1, 0.1)
        g_left, g_right = solver.apply_boundary(FlowState(base=sphere_base, w=w))
        h = sphere_base.h
        # (ghost - inner)/(2h) equals k0 (e^w - 1) = -(e^0.1 - 1) = -0.105171...
        deriv = (g_right - w[sphere_base.n - 1]) / (2 * h)
        assert deriv == pytest.approx(sphere_base.k0_plus * math.expm1(0.1), rel=1e-13)
        assert deriv == pytest.approx(-0.10517091808, rel=1e-8)


class TestStableDt:
    def test_flat_formula(self):
        base = build_base("flat", 1.0, 200)   # h = 0.01
        assert stable_dt(zero_state(base), 0.25) == pytest.approx(1.25e-5, rel=1e-12)

    def test_band_formula(self):
        base = build_base("cos_band", PI / 4, 200)
        h = base.h
        expected = 0.25 * h * h / (2.0 * (1.0 + math.tan(PI / 4) * h))
        assert stable_dt(zero_state(base), 0.25) == pytest.approx(expected, rel=1e-12)

    def test_monotone_in_min_w(self, flat_base):
        shift = FlowState(base=flat_base, w=np.full(flat_base.n + 1, -1.0))
        ratio = stable_dt(shift) / stable_dt(zero_state(flat_base))
        assert ratio == pytest.approx(math.exp(-2.0), rel=1e-12)


class TestSteps:
    def test_flat_fixed_point(self, flat_base):
        state = zero_state(flat_base)
        out = step_explicit(state, 1e-3)
        assert np.all(out.w == 0.0)
        out_i = step_implicit(state, 1e-3)
        assert np.max(np.abs(out_i.w)) < 1e-15

    def test_one_heun_step_taylor(self, sphere_base):
        state = zero_state(sphere_base)
        dt = stable_dt(state)
        out = step_explicit(state, dt)
        # rhs is exactly -1 at t=0, so w = -dt + O(dt^2) with the boundary
        # ghost contributing O(dt^2/h)
        tol = 2.0 * dt * dt * (1.0 + 2.0 / sphere_base.h)
        assert np.max(np.abs(out.w + dt)) < tol

    def test_implicit_matches_explicit_to_first_order(self, sphere_base):
        state = zero_state(sphere_base)
        diffs = []
        for fac in (10.0, 20.0):
            dt = stable_dt(state) / fac
            se = si = state
            for _ in range(100):
                se = step_explicit(se, dt)
                si = step_implicit(si, dt)
            diffs.append(np.max(np.abs(se.w - si.w)))
        # halving dt halves the scheme gap (backward Euler is first order)
        assert 1.5 <= diffs[0] / diffs[1] <= 3.0

    def test_both_schemes_preserve_symmetry_bit_exactly(self, sphere_base):
        state = zero_state(sphere_base)
        dt = stable_dt(state)
        se = si = state
        for _ in range(25):
            se = step_explicit(se, dt)
            si = step_implicit(si, 40 * dt)
        assert np.array_equal(se.w, se.w[::-1])
        assert np.array_equal(si.w, si.w[::-1])

    def test_newton_rejection_surfaces(self, sphere_base):
        cfg = StepperConfig(scheme="implicit_euler", newton_max_iter=1)
        with pytest.raises(StepRejected):
            step_implicit(zero_state(sphere_base), 0.5, cfg)


class TestCurvatureEvolutionResidual:
    def test_flat_exactly_zero(self, flat_base):
        s0 = zero_state(flat_base)
        s1 = step_explicit(s0, 1e-3)
        assert solver.curvature_evolution_residual(s0, s1, 1e-3) == (0.0, 0.0)

    def test_shrinks_second_order(self):
        res = {}
        for n in (64, 128):
            base = build_base("cos_band", PI / 4, n)
            tr = evolve(zero_state(base), StepperConfig(scheme="explicit_heun"),
                        StopRule("t_tilde", 0.1), record_every=10 ** 9, store_states=True)
            prev = tr.state_at(len(tr.records) - 1)
            delta = base.h / 2.0
            tr2 = evolve(prev, StepperConfig(scheme="explicit_heun"),
                         StopRule("t_tilde", 0.1 + delta), record_every=10 ** 9,
                         store_states=True)
            res[n] = solver.curvature_evolution_residual(
                prev, tr2.state_at(len(tr2.records) - 1), delta)
        assert 3.0 <= res[64][0] / res[128][0] <= 5.0
        assert 3.0 <= res[64][1] / res[128][1] <= 5.0


class TestEvolve:
    def test_flat_records_identical(self, flat_run):
        trace, _ = flat_run
        first = trace.records[1]
        for rec in trace.records[1:]:
            for field in solver.OBSERVABLE_FIELDS:
                a, b = getattr(rec, field), getattr(first, field)
                assert a == b or (isinstance(a, float) and math.isnan(a) and math.isnan(b))
        assert max(np.max(np.abs(w)) for w in trace.states) == 0.0

    def test_sphere_band_area_strictly_decreasing(self, sphere_conservation):
        trace, _ = sphere_conservation
        areas = trace.column("area")
        assert np.all(np.diff(areas) < 0)
        assert areas[0] == pytest.approx(2 * PI * math.sqrt(2.0), rel=1e-10)
        assert areas[-1] < areas[0]

    def test_t_tilde_strictly_increasing(self, sphere_conservation):
        trace, _ = sphere_conservation
        assert np.all(np.diff(trace.column("t_tilde")) > 0)

    def test_record_cadence(self, sphere_conservation):
        trace, _ = sphere_conservation
        steps = trace.column("step")
        assert steps[0] == 0
        assert np.all(np.diff(steps[:-1]) == trace.record_every)

    def test_stop_exactly_at_t_tilde(self, sphere_conservation):
        trace, _ = sphere_conservation
        assert trace.records[-1].t_tilde == trace.stop_value

    def test_normalized_time_stop_matches_offline_recomputation(self):
        base = build_base("cos_band", PI / 4, 64)
        trace = evolve(zero_state(base), StepperConfig(scheme="explicit_heun"),
                       StopRule("normalized_time", 0.05), record_every=1)
        ntrace = normalization.normalize_trace(trace, a_target=1.0)
        recomputed = ntrace.records[-1].t
        assert trace.final_normalized_time == pytest.approx(recomputed, rel=1e-10)
        assert trace.final_normalized_time >= 0.05

    def test_wall_steps_budget(self, flat_base):
        trace = evolve(zero_state(flat_base), StepperConfig(),
                       StopRule("wall_steps", 123), record_every=50)
        assert trace.records[-1].step == 123

    def test_area_below_stop(self):
        base = build_base("cos_band", PI / 4, 64)
        trace = evolve(zero_state(base), StepperConfig(scheme="implicit_euler"),
                       StopRule("area_below", 5.0), record_every=1)
        assert trace.records[-1].area < 5.0
        assert trace.records[-2].area >= 5.0

    def test_explicit_stiffness_advises_implicit(self):
        base = build_base("cos_band", PI / 4, 64)
        cfg = StepperConfig(scheme="explicit_heun", dt_min=1e-7)
        with pytest.raises(SolverError, match="implicit_euler") as err:
            evolve(zero_state(base), cfg, StopRule("t_tilde", 5.0), record_every=5000)
        assert err.value.trace is not None
        assert err.value.trace.records[-1].area < 1.0   # died near extinction

    def test_implicit_abort_carries_partial_trace(self):
        base = build_base("cos_band", PI / 4, 64)
        cfg = StepperConfig(scheme="implicit_euler", dt_min=1e-5)
        with pytest.raises(SolverError) as err:
            evolve(zero_state(base), cfg, StopRule("t_tilde", 5.0), record_every=1)
        trace = err.value.trace
        assert trace is not None and len(trace.records) > 10
        assert trace.records[-1].t_tilde < 1.0   # extinction is before t=1

    def test_validation_errors(self, flat_base):
        with pytest.raises(SolverError):
            evolve(zero_state(flat_base), StepperConfig(), StopRule("t_tilde", 1.0),
                   record_every=0)
        with pytest.raises(SolverError):
            StopRule("until_noon", 1.0)
        with pytest.raises(SolverError):
            StepperConfig(scheme="leapfrog")
        with pytest.raises(SolverError):
            StepperConfig(safety=0.9)


class TestSolverInvariants:
    def test_positivity_preserved(self, sphere_conservation, gentle_band,
                                  perturbed_run, flat_run):
        # every scenario with R0 >= 0 and k0 <= 0 keeps min R nonnegative
        for trace, _ in (sphere_conservation, gentle_band, perturbed_run, flat_run):
            floor = -1e-8 * max(trace.records[0].R_max, 1.0)
            assert np.min(trace.column("R_min")) >= floor

    def test_boundary_condition_preserved(self, sphere_conservation):
        trace, _ = sphere_conservation
        drift = np.maximum(np.abs(trace.column("k_minus") - trace.base.k0_minus),
                           np.abs(trace.column("k_plus") - trace.base.k0_plus))
        assert np.max(drift) < 5e-4

    def test_total_curvature_nonincreasing(self, sphere_conservation):
        trace, _ = sphere_conservation
        total = trace.column("total_R")
        assert np.all(np.diff(total) <= 1e-10 * total[0])

    def test_symmetry_preserved_bit_exactly(self, sphere_conservation):
        trace, _ = sphere_conservation
        for w in trace.states:
            assert np.array_equal(w, w[::-1])

    def test_area_law_per_step_second_order(self):
        # per-step defect |dA + trapz(total_R dt)| is O(dt^2) under the
        # CFL-coupled (h, dt) refinement the scheme runs with; measured on
        # the smooth flow (warm start: the t = 0 corner carries a genuine
        # compatibility transient in the curvature flux)
        defects = []
        dts = []
        for n in (64, 128):
            base = build_base("cos_band", PI / 4, n)
            warm = evolve(zero_state(base), StepperConfig(),
                          StopRule("t_tilde", 0.05), record_every=10 ** 9,
                          store_states=True).state_at(-1)
            trace = evolve(warm, StepperConfig(),
                           StopRule("t_tilde", 0.06), record_every=1)
            t = trace.column("t_tilde")
            area = trace.column("area")
            total = trace.column("total_R")
            d = np.abs(np.diff(area) + 0.5 * np.diff(t) * (total[1:] + total[:-1]))
            defects.append(np.max(d))
            dts.append(np.max(np.diff(t)))
        order_in_dt = math.log(defects[0] / defects[1]) / math.log(dts[0] / dts[1])
        assert order_in_dt >= 1.8

    def test_gauss_bonnet_stays_bounded(self, sphere_conservation):
        trace, _ = sphere_conservation
        from cylflow import analysis
        assert analysis.check_gauss_bonnet(trace).passed
