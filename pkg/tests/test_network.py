import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tenn.errors import ConfigurationError
from tenn.graph import ParamGraph, ParamVector
from tenn.jets import seed_inputs
from tenn.network import (HEAD_ROLES, NetworkSpec, PeriodicDictionary, build_periodic_features,
                          init_params, mlp_forward)
from tenn.verify import dyadic_points


def small_spec(act="tanh", heads="vanilla", width=8, depth=2, harmonics=2):
    return NetworkSpec(PeriodicDictionary(harmonics), ((width, act),) * depth, heads)


class TestDictionary:
    def test_origin_k1(self):
        feats = build_periodic_features(seed_inputs(np.zeros(3), 0), PeriodicDictionary(1))
        assert [float(f.value) for f in feats] == [0.0, 0.0, 1.0, 0.0, 1.0]

    def test_size(self):
        for k in (1, 2, 5):
            d = PeriodicDictionary(k)
            feats = build_periodic_features(seed_inputs(np.zeros(3), 0), d)
            assert len(feats) == d.size == 4 * k + 1

    def test_quarter_period_derivatives(self):
        feats = build_periodic_features(seed_inputs(np.array([0.0, 0.25, 0.0]), 2),
                                        PeriodicDictionary(1))
        s = feats[1]
        assert s.value == pytest.approx(1.0, abs=1e-15)
        assert s.d(1) == pytest.approx(0.0, abs=1e-14)
        assert s.d(1, 1) == pytest.approx(-4 * np.pi**2, rel=1e-14)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**20 - 1), st.integers(0, 2**20 - 1), st.floats(0, 1))
    def test_features_periodic(self, i, j, t):
        """Dyadic ``x, y`` make ``x + 1`` exact, so the features must agree to 1e-15."""
        x, y = i / 2**20, j / 2**20
        d = PeriodicDictionary(2)
        a = build_periodic_features(seed_inputs(np.array([t, x, y]), 0), d)
        b = build_periodic_features(seed_inputs(np.array([t, x + 1, y + 1]), 0), d)
        for fa, fb in zip(a, b):
            assert abs(float(fa.value) - float(fb.value)) <= 1e-15

    @settings(max_examples=30, deadline=None)
    @given(st.floats(0, 1), st.floats(0, 1))
    def test_features_periodic_arbitrary_points(self, x, y):
        """For a general float, ``x + 1`` is rounded by up to 1.1e-16 before any
        feature sees it; with ``K = 1`` that moves a feature by at most 7e-16."""
        d = PeriodicDictionary(1)
        a = build_periodic_features(seed_inputs(np.array([0.0, x, y]), 0), d)
        b = build_periodic_features(seed_inputs(np.array([0.0, x + 1, y + 1]), 0), d)
        for fa, fb in zip(a, b):
            assert abs(float(fa.value) - float(fb.value)) <= 1e-15

    @pytest.mark.parametrize("kwargs", [{"harmonics": 0}, {"periods": (1.0,)}, {"periods": (1.0, 0.0)}])
    def test_invalid(self, kwargs):
        with pytest.raises(ConfigurationError):
            PeriodicDictionary(**kwargs)


class TestSpec:
    def test_heads(self):
        for role, names in HEAD_ROLES.items():
            assert small_spec(heads=role).head_names == names

    @pytest.mark.parametrize("hidden", [(), ((0, "tanh"),), ((8, "relu"),)])
    def test_invalid_hidden(self, hidden):
        with pytest.raises(ConfigurationError):
            NetworkSpec(PeriodicDictionary(1), hidden, "vanilla")

    def test_unknown_heads(self):
        with pytest.raises(ConfigurationError):
            small_spec(heads="other")

    def test_dict_round_trip_and_digest(self):
        spec = small_spec("sin", "tenn_split")
        again = NetworkSpec.from_dict(spec.to_dict())
        assert again == spec and again.digest() == spec.digest()
        assert small_spec("tanh").digest() != spec.digest()


class TestInit:
    def test_deterministic(self):
        spec = small_spec()
        np.testing.assert_array_equal(init_params(spec, 7).values, init_params(spec, 7).values)
        assert not np.array_equal(init_params(spec, 7).values, init_params(spec, 8).values)

    def test_bounds_and_zero_biases(self):
        spec = small_spec(width=16, depth=3)
        params = init_params(spec, 0)
        for (fan_in, fan_out, _), (w, b) in zip(spec.layout, params.layers()):
            assert np.all(np.abs(w) <= np.sqrt(6.0 / (fan_in + fan_out)))
            assert np.all(b == 0.0)

    def test_layout_length(self):
        spec = small_spec()
        assert len(init_params(spec, 0)) == sum(r * c + b for r, c, b in spec.layout)


class TestForward:
    @pytest.mark.parametrize("act", ["sin", "tanh"])
    def test_zero_params(self, act):
        spec = small_spec(act)
        pts = np.random.default_rng(0).uniform(0, 1, (10, 3))
        for head in mlp_forward(ParamVector.zeros(spec.layout), spec, pts, 3):
            assert np.all(head.c == 0.0)

    def test_zero_params_softplus_constant(self):
        spec = small_spec("softplus")
        pts = np.random.default_rng(0).uniform(0, 1, (10, 3))
        for head in mlp_forward(ParamVector.zeros(spec.layout), spec, pts, 3):
            assert np.all(head.c[1:] == 0.0)

    def test_identity_wired_sin_feature(self):
        """One linear pass of the sin(2 pi x) feature through sin-free wiring."""
        spec = NetworkSpec(PeriodicDictionary(1), ((1, "tanh"),), "vanilla")
        params = ParamVector.zeros(spec.layout)
        values = params.values.copy()
        # hidden weight picks feature 1 with a tiny gain so tanh is linear to rounding
        gain = 1e-6
        values[1] = gain
        out_offset = 5 * 1 + 1
        values[out_offset] = 1.0 / gain
        params = params.with_values(values)
        head = mlp_forward(params, spec, np.array([0.0, 0.25, 0.0]), 2)[0]
        assert head.value == pytest.approx(1.0, rel=1e-10)
        assert head.d(1) == pytest.approx(0.0, abs=1e-9)
        assert head.d(1, 1) == pytest.approx(-4 * np.pi**2, rel=1e-10)

    def test_layout_mismatch(self):
        with pytest.raises(ConfigurationError):
            mlp_forward(init_params(small_spec(width=4), 0), small_spec(width=8), np.zeros(3), 1)

    def test_order0_matches_order3_value_bitwise(self):
        spec = small_spec("softplus", "tenn_potential", width=16)
        params = init_params(spec, 2)
        pts = np.random.default_rng(3).uniform(0, 1, (64, 3))
        for a, b in zip(mlp_forward(params, spec, pts, 0), mlp_forward(params, spec, pts, 3)):
            np.testing.assert_array_equal(a.value, b.value)


class TestPeriodicity:
    def test_every_entry_at_dyadic_points(self):
        """At dyadic points the shift by one period is exact, so all derivatives agree."""
        pts = dyadic_points(20, 0)
        for draw in range(100):
            spec = small_spec(("sin", "tanh", "softplus")[draw % 3], "tenn_potential")
            params = init_params(spec, draw)
            base = mlp_forward(params, spec, pts, 3)
            for sx, sy in ((1, 1), (-1, -1), (1, -1), (1, 0)):
                moved = pts + np.array([0.0, sx, sy])
                for a, b in zip(base, mlp_forward(params, spec, moved, 3)):
                    assert np.max(np.abs(a.c - b.c)) <= 1e-13

    def test_head_values_dyadic(self):
        spec = small_spec()
        params = init_params(spec, 1)
        pts = dyadic_points(200, 4)
        a = mlp_forward(params, spec, pts, 0)
        b = mlp_forward(params, spec, pts + np.array([0.0, 1.0, 0.0]), 0)
        for ha, hb in zip(a, b):
            assert np.max(np.abs(ha.value - hb.value)) <= 1e-15

    def test_values_at_arbitrary_points(self):
        """The rounding of ``x + 1`` itself bounds agreement here; the network
        amplifies it by its x-gain, so the bound is the 1e-13 periodicity tolerance."""
        spec = small_spec()
        params = init_params(spec, 1)
        pts = np.random.default_rng(4).uniform(0, 1, (200, 3))
        a = mlp_forward(params, spec, pts, 0)
        b = mlp_forward(params, spec, pts + np.array([0.0, 1.0, 0.0]), 0)
        for ha, hb in zip(a, b):
            assert np.max(np.abs(ha.value - hb.value)) <= 1e-13


class TestGradient:
    def test_backward_matches_central_differences(self):
        spec = small_spec("tanh", "vanilla", width=6)
        params = init_params(spec, 9)
        pts = np.random.default_rng(5).uniform(0, 1, (8, 3))

        def loss_value(p, graph=None):
            head = mlp_forward(p, spec, pts, 2, graph)[0]
            return (head.diff(1).diff(1).truncate(0) * head.truncate(0)).mean()

        graph = ParamGraph()
        grad = graph.backward(loss_value(params, graph)).values
        h = 1e-6
        fd = np.empty_like(grad)
        for i in range(len(params)):
            up, down = params.values.copy(), params.values.copy()
            up[i] += h
            down[i] -= h
            fd[i] = (float(loss_value(params.with_values(up)).value)
                     - float(loss_value(params.with_values(down)).value)) / (2 * h)
        np.testing.assert_allclose(grad, fd, rtol=1e-5, atol=1e-5 * np.abs(fd).max())
