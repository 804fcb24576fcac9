import numpy as np
import pytest

from conftest import finite_diff_grad, rel_err
from miniprob import demos
from miniprob.backends import MemoryBackend, TextBackend
from miniprob.distributions import DiscreteUniform, Exponential, Normal
from miniprob.exceptions import NonFiniteStart, UncoveredVariable
from miniprob.graph import opaque_deterministic
from miniprob.inference import SampleConfig, find_hessian_diag, find_map, sample
from miniprob.model import Model
from miniprob.samplers import Metropolis, Nuts, Packer


class TestFindMap:
    def test_normal_mode(self):
        m = Model()
        m.add_free("x", Normal(mu=3.0, sd=1.0))
        m.finalize()
        mp = find_map(m)
        assert float(mp["x"]) == pytest.approx(3.0, abs=1e-6)

    def test_direction_set_mode(self):
        m = Model()
        m.add_free("x", Normal(mu=-1.5, sd=2.0))
        m.finalize()
        mp = find_map(m, method="direction_set")
        assert float(mp["x"]) == pytest.approx(-1.5, abs=1e-6)

    def test_returns_transformed_and_aliases(self, linear_model):
        mp = find_map(linear_model, method="quasi_newton")
        assert set(mp) == {"alpha", "beta", "sigma_log", "sigma"}
        assert float(mp["sigma"]) == pytest.approx(np.exp(float(mp["sigma_log"])))

    def test_never_worse_than_start(self, linear_model):
        start = linear_model.test_point
        mp = find_map(linear_model)
        pt = linear_model.initial_point(mp)
        assert linear_model.logp(pt) >= linear_model.logp(start)

    def test_subset_holds_others_fixed(self, linear_model):
        mp = find_map(linear_model, vars=["alpha"])
        tp = linear_model.test_point
        np.testing.assert_array_equal(mp["beta"], tp["beta"])
        assert float(mp["sigma_log"]) == float(tp["sigma_log"])
        assert float(mp["alpha"]) != float(tp["alpha"])

    def test_discrete_always_held(self, disasters_model):
        mp = find_map(disasters_model, vars=["switchpoint", "early_rate"])
        assert int(mp["switchpoint"]) == 1900  # untouched test value

    def test_nonfinite_start_rejected(self):
        m = Model()
        m.custom_density("v", lambda v: -abs(v) * 0.0 + _neg_inf_below_zero(v),
                         testval=1.0)
        m.finalize()
        with pytest.raises(NonFiniteStart):
            find_map(m, start={"v": -2.0})

    def test_direction_set_works_with_opaque_gradient_blocker(self):
        # gradients are unavailable through the opaque node; Powell still works
        m = Model()
        x = m.add_free("x", Normal(mu=2.0, sd=1.0))
        blocked = opaque_deterministic(lambda v: np.asarray(float(v)), [x.value], ())
        m.custom_density("y", lambda v: Normal(mu=blocked, sd=1.0).logp_expr(v),
                         testval=0.0)
        m.finalize()
        mp = find_map(m, method="direction_set")
        assert np.isfinite(mp["x"])


def _neg_inf_below_zero(v):
    from miniprob.graph import cmp_ge, const, sum_all, switch
    return sum_all(switch(cmp_ge(v, 0.0), const(0.0) * v, const(float("-inf"))))


class TestHessianDiag:
    def test_normal_sd2(self):
        m = Model()
        m.add_free("x", Normal(mu=0.0, sd=2.0))
        m.finalize()
        v = find_hessian_diag(m)
        assert v[0] == pytest.approx(0.25, rel=1e-6)

    def test_exponential_transformed(self):
        m = Model()
        m.add_free("e", Exponential(1.0))
        m.finalize()
        v = find_hessian_diag(m, {"e_log": np.array(0.0)})
        assert v[0] == pytest.approx(1.0, rel=1e-5)

    def test_matches_fd_of_dlogp_on_regression(self, linear_model):
        mp = find_map(linear_model)
        point = linear_model.initial_point(mp)
        names = linear_model.continuous_names()
        packer = Packer([(n, linear_model.var(n).shape) for n in names])
        x0 = packer.pack(point)
        got = find_hessian_diag(linear_model, point)

        for i in range(x0.size):
            h = 1e-5 * max(1.0, abs(x0[i]))
            xp, xm = x0.copy(), x0.copy()
            xp[i] += h
            xm[i] -= h
            gp = packer.pack(linear_model.dlogp(packer.update_point(dict(point), xp), names))
            gm = packer.pack(linear_model.dlogp(packer.update_point(dict(point), xm), names))
            oracle = -(gp[i] - gm[i]) / (2 * h)
            assert got[i] == pytest.approx(oracle, rel=1e-3, abs=1e-5)

    def test_positive_at_map(self, linear_model):
        mp = find_map(linear_model)
        assert np.all(find_hessian_diag(linear_model, mp) > 0)


class TestSample:
    def test_trace_length_with_discard(self):
        m = Model()
        m.add_free("x", Normal(mu=0.0, sd=1.0))
        m.finalize()
        t = sample(m, SampleConfig(draws=400, steps=[Metropolis(m)], seed=1,
                                   warmup=100, discard_tuned=True))
        assert len(t) == 400

    def test_trace_length_without_discard(self):
        m = Model()
        m.add_free("x", Normal(mu=0.0, sd=1.0))
        m.finalize()
        t = sample(m, SampleConfig(draws=400, steps=[Metropolis(m)], seed=1,
                                   warmup=100, discard_tuned=False))
        assert len(t) == 500

    def test_default_warmup_rule(self):
        m = Model()
        m.add_free("x", Normal(mu=0.0, sd=1.0))
        m.finalize()
        t = sample(m, SampleConfig(draws=50, steps=[Metropolis(m)], seed=1,
                                   discard_tuned=False))
        assert len(t) == 50 + 25  # min(500, draws // 2)

    def test_coverage_required(self):
        m = Model()
        m.add_free("a", Normal(mu=0.0, sd=1.0))
        m.add_free("b", Normal(mu=0.0, sd=1.0))
        m.finalize()
        with pytest.raises(UncoveredVariable):
            sample(m, SampleConfig(draws=10, steps=[Metropolis(m, vars=["a"])], seed=0))

    def test_same_seed_identical_backends(self, tmp_path):
        m = Model()
        m.add_free("x", Normal(mu=0.0, sd=1.0))
        m.finalize()
        t1 = sample(m, SampleConfig(draws=200, steps=[Nuts(m)], seed=4, warmup=50,
                                    backend=TextBackend(str(tmp_path / "a"))))
        t2 = sample(m, SampleConfig(draws=200, steps=[Nuts(m)], seed=4, warmup=50,
                                    backend=TextBackend(str(tmp_path / "b"))))
        a = open(tmp_path / "a" / "chain-0.csv").read()
        b = open(tmp_path / "b" / "chain-0.csv").read()
        assert a == b
        np.testing.assert_array_equal(t1["x"], t2["x"])

    def test_memory_and_text_identical(self, tmp_path):
        m = Model()
        m.add_free("x", Normal(mu=0.0, sd=1.0))
        m.finalize()
        t_mem = sample(m, SampleConfig(draws=150, steps=[Metropolis(m)], seed=8,
                                       warmup=50, backend=MemoryBackend()))
        t_txt = sample(m, SampleConfig(draws=150, steps=[Metropolis(m)], seed=8,
                                       warmup=50,
                                       backend=TextBackend(str(tmp_path / "t"))))
        np.testing.assert_array_equal(t_mem["x"], t_txt["x"])

    def test_progress_callback_cadence(self):
        m = Model()
        m.add_free("x", Normal(mu=0.0, sd=1.0))
        m.finalize()
        calls = []
        t = sample(m, SampleConfig(draws=250, steps=[Metropolis(m)], seed=1,
                                   warmup=0, progress=lambda c, d, t_: calls.append((c, d, t_))))
        assert calls == [(0, 100, 250), (0, 200, 250), (0, 250, 250)]

    def test_last_point_restart(self):
        m = Model()
        m.add_free("e", Exponential(1.0))
        m.finalize()
        t = sample(m, SampleConfig(draws=100, steps=[Metropolis(m)], seed=2, warmup=20))
        last = t[-1]
        assert set(last) == {"e_log", "e"}
        t2 = sample(m, SampleConfig(draws=10, steps=[Metropolis(m)], seed=3,
                                    start=last, warmup=0, discard_tuned=False))
        assert np.isfinite(t2["e"]).all()


class TestDemoGradients:
    def test_linear_model_gradient_matches_fd(self, linear_model):
        # independent oracle: central differences on the full log posterior
        names = linear_model.continuous_names()
        packer = Packer([(n, linear_model.var(n).shape) for n in names])
        point = linear_model.test_point
        x0 = packer.pack(point)

        def f(vec):
            return linear_model.logp(packer.update_point(dict(point), vec))

        rng = np.random.default_rng(0)
        for _ in range(5):
            x = x0 + rng.uniform(-0.5, 0.5, x0.size)
            ad = packer.pack(linear_model.dlogp(packer.update_point(dict(point), x), names))
            fd = finite_diff_grad(f, x, h=1e-6)
            assert rel_err(ad, fd) < 1e-6
