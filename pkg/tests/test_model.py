import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ensemblectl.errors import InputError, UnknownExampleError
from ensemblectl.linalg import matrix_exponential
from ensemblectl.model import (
    BUILTINS,
    AffineState,
    EnsembleSystem,
    EnsembleTarget,
    Interval,
    ParameterGrid,
    Scenario,
    builtin_example,
    compute_xi,
    from_document,
    load_document,
    make_grid,
    to_document,
)


class TestInterval:
    def test_valid(self):
        K = Interval(1, 3)
        assert K.length == 2.0 and K.one_signed and not K.crosses_origin

    @pytest.mark.parametrize("lo,hi", [(1, 1), (2, 1), (0, math.inf), (math.nan, 1)])
    def test_invalid(self, lo, hi):
        with pytest.raises(InputError):
            Interval(lo, hi)


class TestSystem:
    def test_dimensions(self):
        s = EnsembleSystem(np.eye(3), np.ones((3, 2)), Interval(1, 2))
        assert (s.n, s.m) == (3, 2)
        np.testing.assert_array_equal(s.A(2.0), 2 * np.eye(3))

    def test_affine_input(self):
        s = EnsembleSystem(np.eye(2), np.zeros((2, 1)), Interval(1, 2), B1=[[0.0], [1.0]])
        np.testing.assert_array_equal(s.B(0.5), [[0.0], [0.5]])

    def test_shape_mismatch(self):
        with pytest.raises(InputError):
            EnsembleSystem(np.eye(3), np.ones((2, 1)), Interval(1, 2))

    def test_all_zero_input(self):
        with pytest.raises(InputError):
            EnsembleSystem(np.eye(2), np.zeros((2, 1)), Interval(1, 2))

    def test_nonfinite(self):
        with pytest.raises(InputError):
            EnsembleSystem([[np.inf]], [[1.0]], Interval(1, 2))


class TestGrid:
    def test_trapezoid(self):
        g = make_grid(Interval(0, 1), 3)
        np.testing.assert_allclose(g.samples, [0, 0.5, 1])
        np.testing.assert_allclose(g.weights, [0.25, 0.5, 0.25])

    def test_two_points(self):
        g = make_grid(Interval(-1, 1), 2)
        np.testing.assert_allclose(g.samples, [-1, 1])
        np.testing.assert_allclose(g.weights, [1, 1])

    def test_five_points(self):
        np.testing.assert_allclose(make_grid(Interval(1, 3), 5).samples, [1, 1.5, 2, 2.5, 3])

    @pytest.mark.parametrize("count", [1, 0, 2.5])
    def test_bad_count(self, count):
        with pytest.raises(InputError):
            make_grid(Interval(0, 1), count)

    def test_unknown_scheme(self):
        with pytest.raises(InputError):
            make_grid(Interval(0, 1), 5, "gauss")

    @pytest.mark.parametrize("count", [2, 3, 4, 9, 33])
    def test_chebyshev_weights(self, count):
        K = Interval(0.5, 2.0)
        g = make_grid(K, count, "chebyshev")
        assert g.samples[0] == K.lo and g.samples[-1] == K.hi
        assert np.all(np.diff(g.samples) > 0) and np.all(g.weights > 0)
        assert abs(g.weights.sum() - K.length) <= 1e-12
        # Clenshaw-Curtis integrates polynomials up to degree count-1 exactly
        deg = count - 1
        exact = (K.hi ** (deg + 1) - K.lo ** (deg + 1)) / (deg + 1)
        assert np.sum(g.weights * g.samples ** deg) == pytest.approx(exact, rel=1e-12)

    @settings(max_examples=50, deadline=None)
    @given(st.floats(-5, 5), st.floats(0.1, 5), st.integers(2, 50), st.floats(-3, 3), st.floats(-3, 3))
    def test_trapezoid_exact_for_affine(self, lo, width, count, a, b):
        K = Interval(lo, lo + width)
        g = make_grid(K, count)
        exact = a * width + b * (K.hi ** 2 - K.lo ** 2) / 2
        assert np.sum(g.weights * (a + b * g.samples)) == pytest.approx(exact, rel=1e-10, abs=1e-10)

    def test_grid_validation(self):
        K = Interval(0, 1)
        with pytest.raises(InputError):
            ParameterGrid([0.0, 0.0, 1.0], [0.5, 0.25, 0.25], K)
        with pytest.raises(InputError):
            ParameterGrid([0.0, 2.0], [0.5, 0.5], K)
        with pytest.raises(InputError):
            ParameterGrid([0.0, 1.0], [0.5, 0.6], K)


class TestComputeXi:
    def test_fig2_at_zero_frequency(self):
        sc = builtin_example("fig2")
        grid = make_grid(sc.system.K, 3)
        xi = compute_xi(sc, grid)
        np.testing.assert_allclose(xi.values[1], [-5.0, -3.0], atol=1e-15)

    def test_zero_horizon(self):
        sc = builtin_example("fig3")
        sc0 = Scenario(sc.system, sc.X0, sc.XF, 0.0)
        grid = make_grid(sc.system.K, 7)
        xi = compute_xi(sc0, grid)
        np.testing.assert_array_equal(xi.values, sc.XF(grid.samples) - sc.X0(grid.samples))

    def test_transport(self):
        sc = builtin_example("fig4")
        grid = make_grid(sc.system.K, 5)
        xi = compute_xi(sc, grid)
        for w, v in zip(grid.samples, xi.values):
            expected = matrix_exponential(-sc.system.A(w) * 25.0) @ np.array([w, 0.0, w])
            np.testing.assert_allclose(v, expected, atol=1e-12)

    def test_linear_in_states(self):
        sc = builtin_example("fig2")
        grid = make_grid(sc.system.K, 9)
        doubled = Scenario(sc.system, sc.X0.scaled(2), sc.XF.scaled(2), sc.T)
        np.testing.assert_allclose(compute_xi(doubled, grid).values, 2 * compute_xi(sc, grid).values,
                                   rtol=1e-14, atol=1e-14)

    def test_grid_outside_k(self):
        sc = builtin_example("fig2")
        grid = make_grid(Interval(-2, 2), 5)
        with pytest.raises(InputError):
            compute_xi(sc, grid)


class TestBuiltins:
    def test_motivating(self):
        s = builtin_example("motivating", a=0.5)
        np.testing.assert_array_equal(s.A0, np.diag([1, 2, 0.5]))
        np.testing.assert_array_equal(s.B0, [[1, 0], [0, 1], [1, 2]])
        assert s.K.as_list() == [1.0, 3.0]

    def test_diag4(self):
        s = builtin_example("diag4", alpha=4)
        np.testing.assert_array_equal(s.A0, np.diag([1, 6, 4, 2.5]))
        np.testing.assert_array_equal(s.B0, [[1, 0], [0, 1], [1, 2], [1, 0]])
        assert s.K.as_list() == [1.0, 2.0]

    def test_fig2(self):
        sc = builtin_example("fig2")
        assert sc.T == 1.0 and sc.system.K.as_list() == [-1.0, 1.0]
        np.testing.assert_array_equal(sc.X0(0.5), [4.0, 3.0])
        np.testing.assert_array_equal(sc.XF(0.5), [0.5, 1.0])

    def test_fig3(self):
        sc = builtin_example("fig3")
        assert sc.T == 4.0 and sc.system.K.as_list() == [0.8, 1.2]
        np.testing.assert_allclose(sc.X0(1.0), [2 * math.pi, 6, 4])
        np.testing.assert_allclose(sc.XF(1.1), [1.1 * math.pi, 1.1, 0])

    def test_unknown(self):
        with pytest.raises(UnknownExampleError, match="harmonic"):
            builtin_example("nosuch")

    def test_unknown_param(self):
        with pytest.raises(InputError):
            builtin_example("diag4", a=1.0)

    @pytest.mark.parametrize("name", sorted(BUILTINS))
    def test_all_construct(self, name):
        assert builtin_example(name) is not None


class TestDocuments:
    @pytest.mark.parametrize("name", ["fig2", "fig3", "fig4", "jordan4"])
    def test_round_trip(self, name, tmp_path):
        obj = builtin_example(name)
        path = tmp_path / "doc.json"
        path.write_text(json.dumps(to_document(obj)))
        back = load_document(path)
        s0 = obj.system if isinstance(obj, Scenario) else obj
        s1 = back.system if isinstance(back, Scenario) else back
        assert np.max(np.abs(s0.A0 - s1.A0)) <= 1e-15
        assert np.max(np.abs(s0.B0 - s1.B0)) <= 1e-15
        assert (s0.B1 is None) == (s1.B1 is None)
        if isinstance(obj, Scenario):
            assert back.T == obj.T
            np.testing.assert_array_equal(back.XF.linear, obj.XF.linear)

    def test_nested_matrices_accepted(self):
        doc = {"n": 2, "m": 1, "A0": [[0, -1], [1, 0]], "B0": [[1], [0]], "K": {"lo": -1, "hi": 1}}
        s = from_document(doc)
        np.testing.assert_array_equal(s.A0, [[0, -1], [1, 0]])

    def test_malformed(self, tmp_path):
        with pytest.raises(InputError):
            from_document({"n": 2, "m": 1, "A0": [1, 2, 3], "B0": [1, 0], "K": {"lo": 0, "hi": 1}})
        with pytest.raises(InputError):
            from_document({"n": 2})
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        with pytest.raises(InputError):
            load_document(bad)


def test_target_validation():
    g = make_grid(Interval(0, 1), 3)
    with pytest.raises(InputError):
        EnsembleTarget(g, np.zeros((2, 2)))
    t = EnsembleTarget.from_function(g, lambda b: [b, 2 * b])
    np.testing.assert_array_equal(t.values[:, 1], [0, 1, 2])
    assert AffineState.constant([1.0, 2.0])(3.0).tolist() == [1.0, 2.0]
