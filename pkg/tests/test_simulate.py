import io
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ensemblectl.errors import InputError
from ensemblectl.model import AffineState, EnsembleSystem, Interval, ParameterGrid, builtin_example, make_grid
from ensemblectl.simulate import (EnsembleTrajectory, ensemble_error, per_beta_errors, propagate, run_scenario,
                                  simulate_ensemble)
from ensemblectl.synthesis import ControlSignal, TimeMesh


def zero_control(T, Nt, m):
    return ControlSignal(TimeMesh(T, Nt), np.zeros((Nt, m)))


class TestPropagate:
    def test_constant_state(self):
        s = EnsembleSystem(np.zeros((2, 2)), np.eye(2), Interval(1, 2))
        times, states = propagate(s, 1.5, zero_control(2.0, 5, 2), [3.0, -1.0])
        assert times[0] == 0.0 and times[-1] == 2.0 and times.size == 41
        np.testing.assert_array_equal(states, np.tile([3.0, -1.0], (41, 1)))

    def test_rotation(self):
        s = builtin_example("harmonic")
        _, states = propagate(s, 1.0, zero_control(math.pi / 2, 10, 2), [1.0, 0.0])
        np.testing.assert_allclose(states[-1], [0.0, 1.0], atol=1e-13)

    def test_integrator(self):
        s = EnsembleSystem([[0.0]], [[1.0]], Interval(1, 2))
        control = ControlSignal(TimeMesh(2.0, 4), [[1.0], [1.0], [-1.0], [3.0]])
        times, states = propagate(s, 1.2, control, [0.5], substeps=2)
        assert states[-1, 0] == pytest.approx(0.5 + 0.5 * (1 + 1 - 1 + 3), rel=1e-14)
        np.testing.assert_allclose(states[:3, 0], [0.5, 0.75, 1.0])

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 10**6), st.integers(1, 12))
    def test_substeps_agree_at_breakpoints(self, seed, sub):
        rng = np.random.default_rng(seed)
        s = EnsembleSystem(rng.standard_normal((3, 3)), rng.standard_normal((3, 2)), Interval(0.5, 1.0))
        control = ControlSignal(TimeMesh(1.0, 6), rng.standard_normal((6, 2)))
        x0 = rng.standard_normal(3)
        _, coarse = propagate(s, 0.7, control, x0, substeps=1)
        _, fine = propagate(s, 0.7, control, x0, substeps=sub)
        scale = max(1.0, np.max(np.abs(coarse)))
        np.testing.assert_allclose(fine[::sub], coarse, atol=1e-12 * scale, rtol=0)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 10**6), st.floats(-2, 2), st.floats(-2, 2))
    def test_linearity(self, seed, a, b):
        rng = np.random.default_rng(seed)
        s = EnsembleSystem(rng.standard_normal((2, 2)), rng.standard_normal((2, 1)), Interval(1, 2))
        mesh = TimeMesh(1.0, 8)
        u1, u2 = rng.standard_normal((8, 1)), rng.standard_normal((8, 1))
        x1, x2 = rng.standard_normal(2), rng.standard_normal(2)
        _, s1 = propagate(s, 1.3, ControlSignal(mesh, u1), x1)
        _, s2 = propagate(s, 1.3, ControlSignal(mesh, u2), x2)
        _, s3 = propagate(s, 1.3, ControlSignal(mesh, a * u1 + b * u2), a * x1 + b * x2)
        np.testing.assert_allclose(s3, a * s1 + b * s2, atol=1e-11 * max(1.0, np.max(np.abs(s3))))

    def test_validation(self):
        s = builtin_example("harmonic")
        c = zero_control(1.0, 2, 2)
        with pytest.raises(InputError):
            propagate(s, 2.0, c, [1.0, 0.0])
        with pytest.raises(InputError):
            propagate(s, 0.5, c, [1.0])
        with pytest.raises(InputError):
            propagate(s, 0.5, zero_control(1.0, 2, 1), [1.0, 0.0])
        with pytest.raises(InputError):
            propagate(s, 0.5, c, [1.0, 0.0], substeps=0)


class TestErrors:
    def test_exact_hit(self):
        s = EnsembleSystem(np.zeros((2, 2)), np.eye(2), Interval(1, 2))
        grid = make_grid(s.K, 3)
        traj = simulate_ensemble(s, grid, zero_control(1.0, 2, 2), AffineState([1.0, 2.0], [0.0, 0.0]))
        assert ensemble_error(traj, AffineState.constant([1.0, 2.0])) == 0.0
        assert ensemble_error(traj, AffineState.constant([1.0, 2.0]), "l2") == 0.0

    def test_three_four_five(self):
        s = EnsembleSystem(np.zeros((2, 2)), np.eye(2), Interval(1, 2))
        grid = ParameterGrid([1.5], [1.0], s.K)
        traj = simulate_ensemble(s, grid, zero_control(1.0, 1, 2), AffineState.constant([3.0, 4.0]))
        assert ensemble_error(traj, np.zeros((1, 2))) == pytest.approx(5.0)
        assert ensemble_error(traj, np.zeros((1, 2)), "l2") == pytest.approx(5.0)

    def test_unknown_norm(self):
        s = EnsembleSystem([[0.0]], [[1.0]], Interval(1, 2))
        traj = simulate_ensemble(s, make_grid(s.K, 2), zero_control(1.0, 1, 1), AffineState.constant([0.0]))
        with pytest.raises(InputError):
            ensemble_error(traj, [[0.0], [0.0]], "max")

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 10**6), st.floats(0.2, 5.0))
    def test_sup_dominates_l2(self, seed, width):
        rng = np.random.default_rng(seed)
        K = Interval(1.0, 1.0 + width)
        s = EnsembleSystem(rng.standard_normal((2, 2)), rng.standard_normal((2, 1)), K)
        grid = make_grid(K, 7)
        traj = simulate_ensemble(s, grid, ControlSignal(TimeMesh(1.0, 4), rng.standard_normal((4, 1))),
                                 AffineState(rng.standard_normal(2), rng.standard_normal(2)))
        XF = AffineState.constant(rng.standard_normal(2))
        sup, l2 = ensemble_error(traj, XF), ensemble_error(traj, XF, "l2")
        assert sup >= l2 / math.sqrt(K.length) - 1e-12
        assert per_beta_errors(traj, XF).shape == (7,)

    def test_csv(self):
        s = EnsembleSystem([[0.0]], [[1.0]], Interval(1, 2))
        traj = simulate_ensemble(s, make_grid(s.K, 2), zero_control(1.0, 1, 1), AffineState.constant([2.0]),
                                 substeps=2)
        assert isinstance(traj, EnsembleTrajectory)
        buf = io.StringIO()
        traj.write_csv(buf)
        lines = buf.getvalue().splitlines()
        assert lines[0] == "beta,t,x_1"
        assert lines[1:4] == ["1.0,0.0,2.0", "1.0,0.5,2.0", "1.0,1.0,2.0"]
        assert len(lines) == 7


class TestScenarios:
    @pytest.mark.parametrize("name,count,nt,metric,threshold", [
        ("fig2", 41, 64, "sup_error", 1e-2),
        ("fig3", 21, 128, "relative_sup_error", 5e-2),
        ("fig4", 21, 256, "sup_error", 1e-2),
    ])
    def test_scenario_reaches_target(self, name, count, nt, metric, threshold):
        sc = builtin_example(name)
        run = run_scenario(sc, make_grid(sc.system.K, count), TimeMesh(sc.T, nt))
        assert getattr(run, metric) <= threshold
        summary = run.error_summary()
        assert len(summary["per_beta_errors"]) == count
        assert summary["sup_error"] == pytest.approx(max(e["error"] for e in summary["per_beta_errors"]))

    def test_horizon_mismatch(self):
        sc = builtin_example("fig2")
        with pytest.raises(InputError):
            run_scenario(sc, make_grid(sc.system.K, 5), TimeMesh(2.0, 8))
