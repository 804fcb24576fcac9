import numpy as np
import pytest
from scipy import stats as sps

from miniprob import graph
from miniprob.distributions import Exponential, Flat, Normal
from miniprob.exceptions import (
    NonFiniteLogp,
    OverlappingTargets,
    UncoveredVariable,
)
from miniprob.graph import const, switch, cmp_ge
from miniprob.inference import SampleConfig, sample
from miniprob.model import Model
from miniprob.rng import stream
from miniprob.samplers import (
    CompoundStep,
    Hmc,
    Metropolis,
    Nuts,
    Slice,
    hessian_diag,
    leapfrog,
    no_uturn,
    scaling_from_point,
    validate_coverage,
)

NEG_INF = float("-inf")


def normal_model(mu=0.0, sd=1.0):
    m = Model()
    m.add_free("x", Normal(mu=mu, sd=sd))
    return m.finalize()


def box_model(lo=-3.0, hi=3.0):
    """Uniform density on a box via a custom term, kept untransformed."""
    m = Model()

    def box_logp(v):
        inb = graph.mul(cmp_ge(v, lo), cmp_ge(hi, v))
        return graph.sum_all(switch(inb, const(0.0), const(NEG_INF)))

    m.custom_density("u", box_logp, testval=0.5 * (lo + hi))
    return m.finalize()


class TestMetropolis:
    def test_equal_logp_always_accepts(self):
        m = Model()
        m.add_free("x", Flat())
        m.finalize()
        step = Metropolis(m)
        rng = stream(1, 0)
        point = m.initial_point()
        for _ in range(200):
            point = step.step(point, rng, tuning=False)
            assert step.last_accepted

    def test_neg_inf_proposal_always_rejected(self):
        m = box_model(-1.0, 1.0)
        # proposals this large never land back inside the box
        step = Metropolis(m, scale=1e8)
        rng = stream(7, 0)
        point = m.initial_point()
        for _ in range(500):
            new = step.step(point, rng, tuning=False)
            assert not step.last_accepted
            assert float(new["u"]) == float(point["u"])
            point = new

    def test_tune_schedule(self):
        f = Metropolis.tune_factor
        assert f(0.0005) == 0.1
        assert f(0.04) == 0.5
        assert f(0.15) == 0.9
        assert f(0.3) == 1.0
        assert f(0.6) == 1.1
        assert f(0.8) == 2.0
        assert f(0.96) == 10.0

    def test_integer_proposals_round_ties_away(self):
        from miniprob.samplers import _round_half_away
        vals = np.array([0.5, -0.5, 1.5, -1.5, 0.4, -0.4])
        np.testing.assert_array_equal(_round_half_away(vals), [1, -1, 2, -2, 0, 0])

    def test_standard_normal_moments(self):
        m = normal_model()
        step = Metropolis(m)
        cfg = SampleConfig(draws=20000, steps=[step], seed=5, warmup=2000)
        trace = sample(m, cfg)
        x = trace["x"]
        assert abs(float(np.mean(x))) < 0.05
        assert 0.9 < float(np.var(x)) < 1.1

    def test_detailed_balance_three_state(self):
        # discrete target on {0, 1, 2} with known masses
        probs = np.array([0.2, 0.5, 0.3])
        m = Model()

        def logp3(v):
            inb = graph.mul(cmp_ge(v, 0), cmp_ge(2, v))
            body = switch(cmp_ge(v, 2), const(np.log(probs[2])),
                          switch(cmp_ge(v, 1), const(np.log(probs[1])),
                                 const(np.log(probs[0]))))
            return graph.sum_all(switch(inb, body, const(NEG_INF)))

        m.custom_density("state", logp3, testval=1, dtype="int")
        m.finalize()
        step = Metropolis(m, scale=1.2)
        rng = stream(11, 0)
        point = m.initial_point()
        counts = np.zeros(3)
        for _ in range(200000):
            point = step.step(point, rng, tuning=False)
            counts[int(point["state"])] += 1
        tv = 0.5 * np.abs(counts / counts.sum() - probs).sum()
        assert tv < 0.01


class TestSlice:
    def test_exponential_mean(self):
        m = Model()

        def exp_logp(v):
            return graph.sum_all(switch(cmp_ge(v, 0.0), -v, const(NEG_INF)))

        m.custom_density("e", exp_logp, testval=1.0)
        m.finalize()
        step = Slice(m)
        rng = stream(3, 0)
        point = m.initial_point()
        total = 0.0
        n = 20000
        for _ in range(n):
            point = step.step(point, rng, tuning=False)
            total += float(point["e"])
        assert 0.95 < total / n < 1.05

    def test_uniform_box_is_uniform(self):
        m = box_model(2.0, 5.0)
        step = Slice(m)
        rng = stream(9, 0)
        point = m.initial_point()
        draws = np.empty(5000)
        for i in range(draws.size):
            point = step.step(point, rng, tuning=False)
            draws[i] = float(point["u"])
        ks = sps.kstest(draws, sps.uniform(loc=2.0, scale=3.0).cdf)
        assert ks.pvalue > 0.01

    def test_degenerate_shrink_returns_start(self):
        # only the single point v == c has positive density
        c = 0.75
        m = Model()

        def spike(v):
            at_c = graph.mul(cmp_ge(v, c), cmp_ge(c, v))
            return graph.sum_all(switch(at_c, const(0.0), const(NEG_INF)))

        m.custom_density("v", spike, testval=c)
        m.finalize()
        step = Slice(m)
        rng = stream(2, 0)
        point = step.step(m.initial_point(), rng, tuning=False)
        assert float(point["v"]) == c

    def test_nonfinite_start_rejected(self):
        m = box_model(0.0, 1.0)
        step = Slice(m)
        with pytest.raises(NonFiniteLogp):
            step.step({"u": np.array(5.0)}, stream(0, 0), False)


class TestLeapfrog:
    def test_hand_computed_step(self):
        m = normal_model()
        q, p = leapfrog(m, {"x": np.array(1.0)}, {"x": np.array(0.0)},
                        eps=0.1, mass=1.0)
        assert float(q["x"]) == pytest.approx(0.995, abs=1e-12)
        assert float(p["x"]) == pytest.approx(-0.09975, abs=1e-12)

    def test_reversibility(self):
        m = normal_model(mu=0.4, sd=1.7)
        rng = stream(21, 0)
        for _ in range(20):
            q0 = {"x": np.array(rng.standard_normal())}
            p0 = {"x": np.array(rng.standard_normal())}
            q1, p1 = leapfrog(m, q0, p0, eps=0.3, mass=2.0)
            q2, p2 = leapfrog(m, q1, {"x": -p1["x"]}, eps=0.3, mass=2.0)
            assert float(q2["x"]) == pytest.approx(float(q0["x"]), abs=1e-12)
            assert float(-p2["x"]) == pytest.approx(float(p0["x"]), abs=1e-12)

    def test_zero_step_is_identity(self):
        m = normal_model()
        q, p = leapfrog(m, {"x": np.array(1.3)}, {"x": np.array(-0.2)},
                        eps=0.0, mass=1.0)
        assert float(q["x"]) == 1.3
        assert float(p["x"]) == -0.2


class TestScaling:
    def test_normal_sd2_curvature(self):
        m = normal_model(sd=2.0)
        v = scaling_from_point(m, m.test_point)
        assert v.shape == (1,)
        assert v[0] == pytest.approx(0.25, rel=1e-6)

    def test_flat_direction_floored(self):
        m = Model()
        m.add_free("f", Flat())
        m.finalize()
        v = scaling_from_point(m, m.test_point)
        assert v[0] == pytest.approx(1e-8)

    def test_hessian_diag_unclipped(self):
        m = Model()
        m.add_free("f", Flat())
        m.finalize()
        assert abs(hessian_diag(m, m.test_point)[0]) < 1e-8

    def test_exponential_transformed_curvature_is_one(self):
        m = Model()
        m.add_free("e", Exponential(1.0))
        m.finalize()
        v = hessian_diag(m, {"e_log": np.array(0.0)})
        assert v[0] == pytest.approx(1.0, rel=1e-5)


class TestNuts:
    def test_uturn_criterion(self):
        dq = np.array([1.0, 0.0])
        assert not no_uturn(dq, np.array([-1.0, 0.0]), np.array([1.0, 1.0]))
        assert not no_uturn(dq, np.array([1.0, 0.0]), np.array([0.0, 5.0]))
        assert no_uturn(dq, np.array([0.5, -4.0]), np.array([2.0, 3.0]))

    def test_never_returns_neg_inf_logp(self):
        m = box_model(-2.0, 2.0)
        # curvature is zero inside the box; provide an explicit unit scaling
        step = Nuts(m, scaling=np.array([1.0]), step_size=0.7)
        rng = stream(13, 0)
        point = m.initial_point()
        for _ in range(2000):
            point = step.step(point, rng, tuning=False)
            assert -2.0 <= float(point["u"]) <= 2.0

    def test_acceptance_statistic_near_target(self):
        m = Model()
        m.add_free("x", Normal(mu=0.0, sd=1.0), shape=10)
        m.finalize()
        step = Nuts(m)
        rng = stream(17, 0)
        point = m.initial_point()
        for _ in range(500):
            point = step.step(point, rng, tuning=True)
        stats = []
        for _ in range(500):
            point = step.step(point, rng, tuning=False)
            stats.append(step.last_accept_stat)
        assert 0.7 <= float(np.mean(stats)) <= 0.9

    def test_nonfinite_start_raises(self):
        m = box_model(0.0, 1.0)
        step = Nuts(m, scaling=np.array([1.0]))
        with pytest.raises(NonFiniteLogp):
            step.step({"u": np.array(9.0)}, stream(0, 0), False)


class TestHmc:
    def test_normal_moments(self):
        m = normal_model()
        step = Hmc(m, step_size=0.4, n_steps=6)
        rng = stream(23, 0)
        point = m.initial_point()
        xs = np.empty(8000)
        for i in range(xs.size):
            point = step.step(point, rng, tuning=False)
            xs[i] = float(point["x"])
        assert abs(xs.mean()) < 0.06
        assert 0.85 < xs.var() < 1.15


class TestCompound:
    def test_single_element_equals_plain_step(self):
        m = normal_model()
        t1 = sample(m, SampleConfig(draws=200, steps=[Metropolis(m)], seed=5,
                                    warmup=50))
        t2 = sample(m, SampleConfig(draws=200, steps=[CompoundStep([Metropolis(m)])],
                                    seed=5, warmup=50))
        np.testing.assert_array_equal(t1["x"], t2["x"])

    def test_overlap_rejected(self):
        m = normal_model()
        with pytest.raises(OverlappingTargets):
            CompoundStep([Metropolis(m), Metropolis(m)])

    def test_uncovered_rejected(self):
        m = Model()
        m.add_free("a", Normal(mu=0.0, sd=1.0))
        m.add_free("b", Normal(mu=0.0, sd=1.0))
        m.finalize()
        with pytest.raises(UncoveredVariable):
            validate_coverage(m, [Metropolis(m, vars=["a"])])

    def test_coverage_ok_with_split(self):
        m = Model()
        m.add_free("a", Normal(mu=0.0, sd=1.0))
        m.add_free("b", Normal(mu=0.0, sd=1.0))
        m.finalize()
        validate_coverage(m, [Nuts(m, vars=["a"]), Metropolis(m, vars=["b"])])


class TestDeterminism:
    def test_same_seed_bitwise_identical(self):
        m = normal_model()
        a = sample(m, SampleConfig(draws=300, steps=[Nuts(m)], seed=42, warmup=100))
        b = sample(m, SampleConfig(draws=300, steps=[Nuts(m)], seed=42, warmup=100))
        np.testing.assert_array_equal(a["x"], b["x"])

    def test_chains_are_distinct_but_reproducible(self):
        m = normal_model()
        t4 = sample(m, SampleConfig(draws=150, steps=[Metropolis(m)], seed=9,
                                    chains=4, warmup=50))
        assert t4.n_chains == 4
        chains = [t4.chains[c]["x"] for c in range(4)]
        for i in range(4):
            for j in range(i + 1, 4):
                assert not np.array_equal(chains[i], chains[j])
        # chain k depends only on (seed, k), not on how many chains ran
        t1 = sample(m, SampleConfig(draws=150, steps=[Metropolis(m)], seed=9,
                                    chains=2, warmup=50))
        np.testing.assert_array_equal(t1.chains[1]["x"], t4.chains[1]["x"])
