"""Log-density recipes for the distribution families used by the models.

Each distribution builds its log density as a graph expression, carries
support metadata used for automatic transforms, and knows its default test
value.  Parameters may be numbers, arrays, or graph expressions (model
variables contribute their value expression).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import graph
from .graph import Expr, as_expr, const, switch, cmp_ge, cmp_gt, sum_all

NEG_INF = float("-inf")


@dataclass(frozen=True)
class Support:
    kind: str  # real | positive | interval | nonneg_int | int_interval | real_vector
    lower: float | None = None
    upper: float | None = None

    def contains(self, x) -> bool:
        """Membership test for test values: strict interior for continuous
        transformable supports, inclusive integer ranges for discrete ones."""
        x = np.asarray(x, dtype=np.float64)
        if not np.all(np.isfinite(x)):
            return False
        if self.kind in ("real", "real_vector"):
            return True
        if self.kind == "positive":
            return bool(np.all(x > 0))
        if self.kind == "interval":
            return bool(np.all((x > self.lower) & (x < self.upper)))
        if self.kind == "nonneg_int":
            return bool(np.all((x >= 0) & (x == np.floor(x))))
        if self.kind == "int_interval":
            return bool(np.all((x >= self.lower) & (x <= self.upper)
                               & (x == np.floor(x))))
        raise ValueError(self.kind)


def _param(x) -> Expr:
    value = getattr(x, "value", None)
    if isinstance(value, Expr):
        return value
    return as_expr(x)


def _require_positive_const(value, what):
    if float(value) <= 0:
        raise ValueError(f"{what} must be strictly positive, got {value}")


def _guard(mask: Expr | None, core: Expr) -> Expr:
    if mask is None:
        return core
    return switch(mask, core, const(NEG_INF))


def _positive_mask(p: Expr) -> Expr | None:
    # constant parameters are validated eagerly, so no runtime guard needed
    if p.kind == "constant":
        _require_positive_const(np.min(p.const_value), "parameter")
        return None
    return cmp_gt(p, 0.0)


def _and(a: Expr | None, b: Expr | None) -> Expr | None:
    if a is None:
        return b
    if b is None:
        return a
    return graph.mul(a, b)


class Distribution:
    dtype = "float"
    support = Support("real")

    def logp_expr(self, value) -> Expr:
        """Scalar expression: elementwise log density summed over the value."""
        raise NotImplementedError

    def default_testval(self, shape, evaluate) -> np.ndarray:
        """Default start value; ``evaluate`` maps parameter Exprs to arrays."""
        raise NotImplementedError


class Normal(Distribution):
    """Normal density, parameterized by sd or by precision tau = 1/sd^2."""

    def __init__(self, mu=0.0, sd=None, tau=None):
        if (sd is None) == (tau is None):
            raise ValueError("Normal takes exactly one of sd or tau")
        self.mu = _param(mu)
        if sd is not None:
            self.sd = _param(sd)
            self._mask = _positive_mask(self.sd)
            self.tau = graph.div(1.0, graph.mul(self.sd, self.sd))
        else:
            self.tau = _param(tau)
            self._mask = _positive_mask(self.tau)
            self.sd = None

    def logp_expr(self, value) -> Expr:
        x = as_expr(value)
        d = graph.sub(x, self.mu)
        core = (0.5 * graph.log(self.tau)
                - 0.5 * np.log(2.0 * np.pi)
                - 0.5 * self.tau * d * d)
        return sum_all(_guard(self._mask, core))

    def default_testval(self, shape, evaluate):
        return np.broadcast_to(evaluate(self.mu), shape).astype(np.float64)


class HalfNormal(Distribution):
    support = Support("positive")

    def __init__(self, sd=1.0):
        self.sd = _param(sd)
        self._mask = _positive_mask(self.sd)
        self.tau = graph.div(1.0, graph.mul(self.sd, self.sd))

    def logp_expr(self, value) -> Expr:
        x = as_expr(value)
        core = (np.log(2.0) - 0.5 * np.log(2.0 * np.pi)
                + 0.5 * graph.log(self.tau) - 0.5 * self.tau * x * x)
        mask = _and(self._mask, cmp_ge(x, 0.0))
        return sum_all(_guard(mask, core))

    def default_testval(self, shape, evaluate):
        m = evaluate(self.sd) * np.sqrt(2.0 / np.pi)
        return np.broadcast_to(m, shape).astype(np.float64)


class Uniform(Distribution):
    def __init__(self, lower, upper):
        self.lower = float(lower)
        self.upper = float(upper)
        if not self.upper > self.lower:
            raise ValueError("Uniform requires upper > lower")
        self.support = Support("interval", self.lower, self.upper)

    def logp_expr(self, value) -> Expr:
        x = as_expr(value)
        inb = graph.mul(cmp_ge(x, self.lower), cmp_ge(self.upper, x))
        return sum_all(_guard(inb, const(-np.log(self.upper - self.lower))))

    def default_testval(self, shape, evaluate):
        mid = 0.5 * (self.lower + self.upper)
        return np.broadcast_to(mid, shape).astype(np.float64)


class Exponential(Distribution):
    """Exponential with a RATE parameter (mean 1/rate)."""

    support = Support("positive")

    def __init__(self, rate):
        self.rate = _param(rate)
        self._mask = _positive_mask(self.rate)

    def logp_expr(self, value) -> Expr:
        x = as_expr(value)
        core = graph.log(self.rate) - self.rate * x
        mask = _and(self._mask, cmp_ge(x, 0.0))
        return sum_all(_guard(mask, core))

    def default_testval(self, shape, evaluate):
        return np.broadcast_to(1.0 / evaluate(self.rate), shape).astype(np.float64)


class Poisson(Distribution):
    dtype = "int"
    support = Support("nonneg_int")

    def __init__(self, rate):
        self.rate = _param(rate)
        self._mask = _positive_mask(self.rate)

    def logp_expr(self, value) -> Expr:
        k = as_expr(value)
        core = k * graph.log(self.rate) - self.rate - graph.lgamma(k + 1.0)
        mask = _and(self._mask, cmp_ge(k, 0.0))
        return sum_all(_guard(mask, core))

    def default_testval(self, shape, evaluate):
        rate = np.broadcast_to(evaluate(self.rate), shape)
        return np.floor(rate).astype(np.int64)


class DiscreteUniform(Distribution):
    dtype = "int"

    def __init__(self, lower, upper):
        self.lower = int(lower)
        self.upper = int(upper)
        if not self.upper >= self.lower:
            raise ValueError("DiscreteUniform requires upper >= lower")
        self.support = Support("int_interval", self.lower, self.upper)

    def logp_expr(self, value) -> Expr:
        k = as_expr(value)
        inb = graph.mul(cmp_ge(k, self.lower), cmp_ge(self.upper, k))
        return sum_all(_guard(inb, const(-np.log(self.upper - self.lower + 1.0))))

    def default_testval(self, shape, evaluate):
        mid = np.floor(0.5 * (self.lower + self.upper))
        return np.broadcast_to(mid, shape).astype(np.int64)


class StudentT(Distribution):
    """Student-t with degrees of freedom nu and precision-like scale lam."""

    def __init__(self, nu, mu=0.0, lam=1.0):
        self.nu = _param(nu)
        self.mu = _param(mu)
        self.lam = _param(lam)
        self._mask = _and(_positive_mask(self.nu), _positive_mask(self.lam))

    def logp_expr(self, value) -> Expr:
        x = as_expr(value)
        nu, lam = self.nu, self.lam
        d = graph.sub(x, self.mu)
        core = (graph.lgamma((nu + 1.0) / 2.0) - graph.lgamma(nu / 2.0)
                + 0.5 * graph.log(lam / (nu * np.pi))
                - ((nu + 1.0) / 2.0) * graph.log(1.0 + lam * d * d / nu))
        return sum_all(_guard(self._mask, core))

    def default_testval(self, shape, evaluate):
        return np.broadcast_to(evaluate(self.mu), shape).astype(np.float64)


class GaussianRandomWalk(Distribution):
    """Vector prior: increments are iid Normal with precision tau; the first
    element gets a flat (zero) contribution."""

    support = Support("real_vector")

    def __init__(self, tau, length=None):
        self.tau = _param(tau)
        self._mask = _positive_mask(self.tau)
        self.length = None if length is None else int(length)

    def logp_expr(self, value) -> Expr:
        x = as_expr(value)
        if len(x.shape) != 1 or x.shape[0] < 2:
            raise ValueError("GaussianRandomWalk needs a vector value of length >= 2")
        if self.length is not None and x.shape[0] != self.length:
            raise ValueError(
                f"GaussianRandomWalk length {self.length} != value length {x.shape[0]}")
        d = x[1:] - x[:-1]
        core = (0.5 * graph.log(self.tau) - 0.5 * np.log(2.0 * np.pi)
                - 0.5 * self.tau * d * d)
        return sum_all(_guard(self._mask, core))

    def default_testval(self, shape, evaluate):
        return np.zeros(shape, dtype=np.float64)


class Bernoulli(Distribution):
    dtype = "int"
    support = Support("int_interval", 0, 1)

    def __init__(self, p):
        self.p = _param(p)

    def logp_expr(self, value) -> Expr:
        x = as_expr(value)
        # select the branch instead of x*log(p) so 0 * -inf never appears
        core = switch(cmp_ge(x, 1), graph.log(self.p), graph.log(1.0 - self.p))
        inb = graph.mul(cmp_ge(x, 0), cmp_ge(1, x))
        return sum_all(_guard(inb, core))

    def default_testval(self, shape, evaluate):
        p = np.broadcast_to(evaluate(self.p), shape)
        return (p > 0.5).astype(np.int64)


class Flat(Distribution):
    """Improper constant density: contributes zero everywhere."""

    def logp_expr(self, value) -> Expr:
        return const(0.0)

    def default_testval(self, shape, evaluate):
        return np.zeros(shape, dtype=np.float64)


class Custom(Distribution):
    """Arbitrary log density from a function mapping a value Expr to an Expr."""

    def __init__(self, logp_fn, dtype="float"):
        self.logp_fn = logp_fn
        self.dtype = dtype  # storage/proposal dtype; density defines the support
        self.support = Support("real")

    def logp_expr(self, value) -> Expr:
        out = self.logp_fn(as_expr(value))
        if not isinstance(out, Expr):
            out = as_expr(out)
        if out.shape != ():
            out = sum_all(out)
        return out

    def default_testval(self, shape, evaluate):
        return None  # caller must supply a test value
