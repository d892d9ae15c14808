"""Engine-level checks: values, gradient rules, Adam, determinism."""

import math

import numpy as np
import pytest

from latentbo import autodiff as ad


def build_params(rng, shapes):
    store = ad.ParamStore()
    for name, shape in shapes.items():
        store.add(name, rng.normal(size=shape))
    return store


class TestForwardValues:
    def test_affine_chain(self):
        store = ad.ParamStore()
        w = store.add("w", 2.0)
        x = ad.constant(3.0)
        out = w * x
        assert out.item() == 6.0

    def test_leaky_relu_negative_branch(self):
        out = ad.leaky_relu(ad.constant([-2.0, 5.0]), 0.01)
        np.testing.assert_allclose(out.value, [-0.02, 5.0])

    def test_relu_clamps(self):
        out = ad.relu(ad.constant([-3.0, 0.0, 2.0]))
        np.testing.assert_allclose(out.value, [0.0, 0.0, 2.0])

    def test_everything_is_float64(self):
        out = ad.exp(ad.constant(np.ones(3, dtype=np.float32)))
        assert out.value.dtype == np.float64

    def test_pairwise_sqdist_diagonal_exactly_zero(self):
        rng = np.random.default_rng(0)
        z = ad.constant(rng.normal(size=(7, 3)))
        d2 = ad.pairwise_sqdist(z).value
        assert np.all(np.diag(d2) == 0.0)
        np.testing.assert_array_equal(d2, d2.T)

    def test_pairwise_dist_matches_norms(self):
        rng = np.random.default_rng(1)
        zv = rng.normal(size=(6, 2))
        d = ad.pairwise_dist(ad.constant(zv)).value
        expected = np.linalg.norm(zv[:, None, :] - zv[None, :, :], axis=2)
        np.testing.assert_allclose(d, expected, atol=1e-12)

    def test_gaussian_nll_value_matches_dense_formula(self):
        rng = np.random.default_rng(2)
        a = rng.normal(size=(5, 5))
        m = a @ a.T + 5.0 * np.eye(5)
        y = rng.normal(size=5)
        got = ad.gaussian_nll(ad.constant(m), y).item()
        expected = (
            0.5 * y @ np.linalg.solve(m, y)
            + 0.5 * math.log(np.linalg.det(m))
            + 0.5 * 5 * math.log(2 * math.pi)
        )
        np.testing.assert_allclose(got, expected, rtol=1e-10)

    def test_gaussian_nll_one_point_frozen_value(self):
        # M = [[1.1]], y = [1]: 1/2 * 1/1.1 + 1/2 log 1.1 + 1/2 log 2pi
        got = ad.gaussian_nll(ad.constant([[1.1]]), [1.0]).item()
        np.testing.assert_allclose(got, 1.4211390776522896, rtol=1e-12)


class TestGradientRules:
    def test_square_grad(self):
        store = ad.ParamStore()
        w = store.add("w", 3.0)
        (w * w).backward()
        np.testing.assert_allclose(w.grad, 6.0)

    def test_tanh_grad_at_zero(self):
        store = ad.ParamStore()
        x = store.add("x", 0.0)
        ad.tanh(x).backward()
        np.testing.assert_allclose(x.grad, 1.0)

    def test_relu_subgradient_zero_at_kink(self):
        store = ad.ParamStore()
        x = store.add("x", np.array([0.0, -1.0, 2.0]))
        ad.tsum(ad.relu(x)).backward()
        np.testing.assert_array_equal(x.grad, [0.0, 0.0, 1.0])

    def test_leaky_relu_grads(self):
        store = ad.ParamStore()
        x = store.add("x", np.array([-2.0, 3.0]))
        ad.tsum(ad.leaky_relu(x, 0.01)).backward()
        np.testing.assert_allclose(x.grad, [0.01, 1.0])

    def test_fanout_accumulates(self):
        store = ad.ParamStore()
        w = store.add("w", 2.0)
        out = w * w + w  # dy/dw = 2w + 1 = 5
        out.backward()
        np.testing.assert_allclose(w.grad, 5.0)

    def test_broadcast_add_sums_over_rows(self):
        store = ad.ParamStore()
        b = store.add("b", np.zeros(3))
        x = ad.constant(np.ones((4, 3)))
        ad.tsum(x + b).backward()
        np.testing.assert_array_equal(b.grad, [4.0, 4.0, 4.0])

    def test_pairwise_dist_grad_zero_safe(self):
        store = ad.ParamStore()
        z = store.add("z", np.array([[1.0, 2.0], [1.0, 2.0], [0.0, 0.0]]))
        ad.tsum(ad.pairwise_dist(z)).backward()
        assert np.all(np.isfinite(z.grad))

    def test_gaussian_nll_grad_closed_form(self):
        rng = np.random.default_rng(3)
        a = rng.normal(size=(4, 4))
        mv = a @ a.T + 4.0 * np.eye(4)
        y = rng.normal(size=4)
        store = ad.ParamStore()
        m = store.add("m", mv)
        ad.gaussian_nll(m, y).backward()
        m_inv = np.linalg.inv(mv)
        alpha = m_inv @ y
        np.testing.assert_allclose(m.grad, 0.5 * (m_inv - np.outer(alpha, alpha)), atol=1e-10)

    def test_backward_twice_accumulates(self):
        store = ad.ParamStore()
        w = store.add("w", 3.0)
        out = w * w
        out.backward()
        out.backward()
        np.testing.assert_allclose(w.grad, 12.0)

    def test_linearity_of_backward(self):
        rng = np.random.default_rng(4)
        xv = rng.normal(size=(3, 2))

        def grads_of(fn):
            store = ad.ParamStore()
            x = store.add("x", xv)
            fn(x).backward()
            return x.grad

        f = lambda x: ad.tsum(ad.tanh(x))
        g = lambda x: ad.tsum(x * x)
        a, b = 2.5, -1.25
        combined = grads_of(lambda x: a * f(x) + b * g(x))
        separate = a * grads_of(f) + b * grads_of(g)
        np.testing.assert_allclose(combined, separate, atol=1e-12)


def scalar_graphs():
    """Smooth scalar-valued builders used for finite-difference spot checks."""

    def chain(p):
        return ad.tsum(ad.tanh(p["a"] @ p["b"]) * p["c"])

    def expo(p):
        return ad.tsum(ad.exp(p["a"] * 0.3)) + ad.tsum(ad.log(ad.exp(p["b"]) + 1.5))

    def divided(p):
        return ad.tsum(p["a"] / (ad.exp(p["b"]) + 2.0)) + ad.mean(p["c"] * p["c"])

    def shaped(p):
        return ad.tsum(ad.reshape(p["a"], (6,)) * 2.0) + ad.tsum(p["a"].T @ p["c"])

    def distances(p):
        return ad.tsum(ad.pairwise_dist(p["z"])) + ad.tsum(ad.pairwise_sqdist(p["z"]))

    def nll(p):
        m = p["l"] @ p["l"].T + ad.constant(6.0 * np.eye(4))
        return ad.gaussian_nll(m, np.array([0.3, -1.2, 0.7, 0.1]))

    return {
        "chain": (chain, {"a": (3, 2), "b": (2, 4), "c": (3, 4)}),
        "expo": (expo, {"a": (5,), "b": (4,)}),
        "divided": (divided, {"a": (2, 3), "b": (2, 3), "c": (7,)}),
        "shaped": (shaped, {"a": (2, 3), "c": (2, 3)}),
        "distances": (distances, {"z": (5, 2)}),
        "nll": (nll, {"l": (4, 4)}),
    }


class TestFiniteDifferences:
    def test_gradients_match_finite_differences(self):
        graphs = scalar_graphs()
        rng = np.random.default_rng(20240817)
        names = sorted(graphs)
        trials = 0
        for round_ in range(20):
            for gname in names:
                fn, shapes = graphs[gname]
                store = build_params(rng, shapes)
                # keep distance rows well separated so sqrt stays smooth
                if "z" in shapes:
                    store["z"].value = store["z"].value * 3.0 + np.arange(5)[:, None]
                fn(store).backward()
                for pname in store.names():
                    p = store[pname]
                    base = p.value.copy()

                    def scalar(v, _p=p, _fn=fn, _store=store, _base=base):
                        _p.value = v
                        out = float(_fn(_store).value)
                        _p.value = _base
                        return out

                    fd = ad.finite_difference_grad(scalar, base.copy(), step=1e-5)
                    np.testing.assert_allclose(
                        p.grad, fd, rtol=1e-4, atol=1e-6,
                        err_msg=f"{gname}:{pname} round {round_}",
                    )
                    trials += 1
        assert trials >= 100


class TestAdam:
    def test_single_step_frozen_value(self):
        store = ad.ParamStore()
        w = store.add("w", 1.0)
        (w * w).backward()
        ad.adam_step(store, lr=0.01)
        np.testing.assert_allclose(w.value, 0.99000000005, rtol=0, atol=1e-15)
        assert store.step_count == 1
        assert w.grad is None

    def test_zero_gradient_leaves_value(self):
        store = ad.ParamStore()
        w = store.add("w", np.array([1.0, -2.0]))
        ad.adam_step(store)
        np.testing.assert_array_equal(w.value, [1.0, -2.0])
        assert store.step_count == 1

    def test_descends_a_quadratic(self):
        store = ad.ParamStore()
        w = store.add("w", np.array([4.0, -3.0]))
        for _ in range(500):
            ad.tsum(w * w).backward()
            ad.adam_step(store, lr=0.05)
        assert np.all(np.abs(w.value) < 1e-2)

    def test_rejects_nonpositive_lr(self):
        store = ad.ParamStore()
        store.add("w", 1.0)
        with pytest.raises(ad.AutodiffError):
            ad.adam_step(store, lr=0.0)


class TestParamStore:
    def test_duplicate_name_rejected(self):
        store = ad.ParamStore()
        store.add("w", 1.0)
        with pytest.raises(ad.AutodiffError):
            store.add("w", 2.0)

    def test_snapshot_roundtrip(self):
        store = ad.ParamStore()
        w = store.add("w", np.arange(3.0))
        snap = store.values_snapshot()
        w.value = w.value * 0.0
        store.load_values(snap)
        np.testing.assert_array_equal(w.value, [0.0, 1.0, 2.0])

    def test_load_shape_mismatch_rejected(self):
        store = ad.ParamStore()
        store.add("w", np.zeros(3))
        with pytest.raises(ad.AutodiffError):
            store.load_values({"w": np.zeros((2, 2))})


class TestErrors:
    def test_matmul_shape_error_names_op(self):
        a = ad.constant(np.zeros((2, 3)))
        b = ad.constant(np.zeros((4, 5)))
        with pytest.raises(ad.AutodiffError, match="matmul"):
            a @ b

    def test_add_shape_error(self):
        with pytest.raises(ad.AutodiffError, match="add"):
            ad.constant(np.zeros(3)) + ad.constant(np.zeros(4))

    def test_backward_requires_scalar(self):
        store = ad.ParamStore()
        w = store.add("w", np.ones(3))
        with pytest.raises(ad.AutodiffError, match="scalar"):
            (w * 2.0).backward()


class TestDeterminism:
    def test_same_seed_same_grads_bitwise(self):
        def run():
            rng = np.random.default_rng(99)
            store = ad.ParamStore()
            a = store.add("a", rng.normal(size=(4, 3)))
            b = store.add("b", rng.normal(size=(3, 2)))
            out = ad.tsum(ad.tanh(a @ b) * rng.normal(size=(4, 2)))
            out.backward()
            return a.grad.copy(), b.grad.copy(), out.item()

        g1a, g1b, v1 = run()
        g2a, g2b, v2 = run()
        assert v1 == v2
        np.testing.assert_array_equal(g1a, g2a)
        np.testing.assert_array_equal(g1b, g2b)


class TestDenseLayers:
    def test_init_bounds_and_bias(self):
        rng = np.random.default_rng(5)
        store = ad.ParamStore()
        ad.init_dense(store, "l0", 20, 10, rng)
        bound = math.sqrt(6.0 / 30.0)
        w = store["l0.W"].value
        assert w.shape == (20, 10)
        assert np.all(np.abs(w) <= bound)
        np.testing.assert_array_equal(store["l0.b"].value, np.zeros(10))

    def test_forward_matches_hand_affine(self):
        rng = np.random.default_rng(6)
        store = ad.ParamStore()
        ad.init_dense(store, "l0", 3, 2, rng)
        x = rng.normal(size=(5, 3))
        out = ad.dense(store, "l0", ad.constant(x), "leaky_relu", 0.1)
        h = x @ store["l0.W"].value + store["l0.b"].value
        np.testing.assert_allclose(out.value, np.where(h >= 0, h, 0.1 * h), atol=1e-15)

    def test_graph_and_numpy_paths_agree(self):
        rng = np.random.default_rng(7)
        store = ad.ParamStore()
        ad.init_dense(store, "l0", 4, 3, rng)
        x = rng.normal(size=(6, 4))
        via_graph = ad.dense(store, "l0", ad.constant(x), "tanh").value
        via_numpy = ad.dense_forward(
            store["l0.W"].value, store["l0.b"].value, x, "tanh"
        )
        np.testing.assert_array_equal(via_graph, via_numpy)

    def test_bad_activation_rejected(self):
        rng = np.random.default_rng(8)
        store = ad.ParamStore()
        ad.init_dense(store, "l0", 2, 2, rng)
        with pytest.raises(ad.AutodiffError, match="activation"):
            ad.dense(store, "l0", ad.constant(np.zeros((1, 2))), "gelu")
