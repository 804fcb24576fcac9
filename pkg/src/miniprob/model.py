"""Model container: free/observed/deterministic variables and the joint
log posterior over the transformed (unconstrained) space.

Variables with positive support are sampled through a log transform, two-sided
supports through a log-odds transform; discrete variables stay untransformed.
The joint log posterior is the sum of all prior terms (with Jacobian
corrections) and observed likelihood terms; terms are summed in name order so
registration order cannot change the result.
"""

from __future__ import annotations

from typing import Callable, Mapping, Sequence

import numpy as np

from . import graph
from .distributions import Custom, Distribution
from .exceptions import (
    AllMissing,
    DuplicateName,
    ModelFrozen,
    NonFiniteLogp,
    ShapeMismatch,
    TestvalOutsideSupport,
    UnknownVariable,
)
from .graph import Expr, Point, const, eval_expr, free_input
from .transforms import IntervalTransform, LogTransform


def _as_shape(shape) -> tuple:
    if shape is None:
        return ()
    if isinstance(shape, (int, np.integer)):
        return (int(shape),)
    return tuple(int(s) for s in shape)


class FreeVar:
    """A sampled variable: distribution, optional transform, test value."""

    def __init__(self, name, dist, shape, transform, testval):
        self.name = name
        self.dist = dist
        self.shape = shape
        self.transform = transform
        self.dtype = dist.dtype
        self.testval = testval  # untransformed space
        self.sampling_name = transform.var_name(name) if transform else name
        self.input = free_input(self.sampling_name, shape, dtype=self.dtype)
        self.value = transform.backward_expr(self.input) if transform else self.input

    @property
    def transformed_name(self):
        return self.sampling_name

    def sampling_testval(self):
        if self.transform:
            return self.transform.forward(self.testval)
        return self.testval

    def __repr__(self):
        return f"FreeVar({self.name!r}, shape={self.shape})"


class ObservedVar:
    """A likelihood node with fixed data, possibly with masked-out entries."""

    def __init__(self, name, dist, data, mask, missing_var):
        self.name = name
        self.dist = dist
        self.data = data
        self.mask = mask
        self.missing_var = missing_var

    def __repr__(self):
        return f"ObservedVar({self.name!r}, shape={self.data.shape})"


def _transform_for(dist: Distribution):
    kind = dist.support.kind
    if dist.dtype == "int":
        return None
    if kind == "positive":
        return LogTransform()
    if kind == "interval":
        return IntervalTransform(dist.support.lower, dist.support.upper)
    return None


class Model:
    """Registry of random variables plus the joint log-posterior graph."""

    def __init__(self):
        self.free_vars: list[FreeVar] = []
        self.observed_vars: list[ObservedVar] = []
        self.deterministics: list[tuple[str, Expr]] = []
        self._names: set[str] = set()
        self._terms: dict[str, Expr] = {}
        self._test_point: Point = {}
        self._logp_graph: Expr | None = None
        self._finalized = False
        self._var_index: dict[str, FreeVar] = {}
        self._var_index_size = -1

    # --- registration ------------------------------------------------------

    def _claim_name(self, *names):
        for n in names:
            if n in self._names:
                raise DuplicateName(f"variable name {n!r} already in use")
        self._names.update(names)

    def _check_open(self):
        if self._finalized:
            raise ModelFrozen("model is finalized; no further variables can be added")

    def _eval_param(self, expr: Expr):
        return eval_expr(expr, self._test_point)

    def add_free(self, name: str, dist: Distribution, shape=(), testval=None) -> FreeVar:
        self._check_open()
        shape = _as_shape(shape)
        if isinstance(dist, Custom) and testval is None:
            raise TestvalOutsideSupport(f"{name}: a custom density needs an explicit testval")
        if testval is None:
            testval = dist.default_testval(shape, self._eval_param)
        testval = np.asarray(testval)
        if testval.shape != shape:
            testval = np.broadcast_to(testval, shape).copy()
        if dist.dtype == "int":
            testval = testval.astype(np.int64)
        else:
            testval = testval.astype(np.float64)
        if not dist.support.contains(testval):
            raise TestvalOutsideSupport(
                f"{name}: test value {testval!r} outside the distribution support")

        transform = _transform_for(dist)
        var = FreeVar(name, dist, shape, transform, testval)
        self._claim_name(name, *([var.sampling_name] if transform else []))

        term = dist.logp_expr(var.value)
        if transform is not None:
            term = term + transform.log_jacobian_expr(var.input)
        self._register_free(var, term)

        if isinstance(dist, Custom):
            tv_logp = float(eval_expr(term, self._test_point))
            if not np.isfinite(tv_logp):
                raise TestvalOutsideSupport(
                    f"{name}: custom density is {tv_logp} at the test value")
        return var

    def _register_free(self, var: FreeVar, term: Expr | None):
        self.free_vars.append(var)
        if term is not None:
            self._terms[var.name] = term
        self._test_point[var.sampling_name] = np.asarray(var.sampling_testval())

    def custom_density(self, name: str, logp_fn: Callable[[Expr], Expr],
                       shape=(), testval=None, dtype="float") -> FreeVar:
        """Free variable with an arbitrary log density; never transformed."""
        return self.add_free(name, Custom(logp_fn, dtype=dtype), shape, testval)

    def add_observed(self, name: str, dist: Distribution, data, mask=None) -> ObservedVar:
        self._check_open()
        data = np.asarray(data)
        data = data.astype(np.int64 if dist.dtype == "int" else np.float64)
        missing_var = None
        if mask is not None:
            mask = np.asarray(mask, dtype=bool)
            if mask.shape != data.shape:
                raise ShapeMismatch(
                    f"{name}: mask shape {mask.shape} != data shape {data.shape}")
            if mask.all():
                raise AllMissing(f"{name}: every entry is masked")
            if not mask.any():
                mask = None

        if mask is None:
            self._claim_name(name)
            term = dist.logp_expr(const(data))
            obs = ObservedVar(name, dist, data, None, None)
        else:
            if data.ndim != 1:
                raise ShapeMismatch(f"{name}: masked data must be one-dimensional")
            miss_name = name + ".missing_values"
            self._claim_name(name, miss_name)
            n_miss = int(mask.sum())

            full_testval = dist.default_testval(data.shape, self._eval_param)
            miss_var = FreeVar(miss_name, dist, (n_miss,), None, full_testval[mask])
            # observed entries stay constants; masked entries read the free input
            composed = graph.concat([const(data[~mask]), miss_var.input])
            perm = np.empty(data.shape[0], dtype=np.int64)
            perm[~mask] = np.arange(data.shape[0] - n_miss)
            perm[mask] = data.shape[0] - n_miss + np.arange(n_miss)
            term = dist.logp_expr(composed[perm])
            self._register_free(miss_var, None)
            obs = ObservedVar(name, dist, data, mask, miss_var)

        self._terms[name] = term
        self.observed_vars.append(obs)
        return obs

    def add_deterministic(self, name: str, expr) -> None:
        self._check_open()
        self._claim_name(name)
        self.deterministics.append((name, graph.as_expr(expr)))

    # --- finalization and evaluation ----------------------------------------

    def finalize(self) -> "Model":
        if self._finalized:
            return self
        if self._terms:
            total = None
            for key in sorted(self._terms):
                t = self._terms[key]
                total = t if total is None else total + t
        else:
            total = const(0.0)
        self._logp_graph = total
        self._finalized = True
        lp = self.logp(self._test_point)
        if not np.isfinite(lp):
            raise NonFiniteLogp(f"log posterior is {lp} at the test point")
        return self

    @property
    def finalized(self) -> bool:
        return self._finalized

    @property
    def logp_graph(self) -> Expr:
        self.finalize()
        return self._logp_graph

    @property
    def test_point(self) -> Point:
        self.finalize()
        return {k: np.array(v) for k, v in self._test_point.items()}

    def logp(self, point: Mapping) -> float:
        return float(eval_expr(self.logp_graph, point))

    def dlogp(self, point: Mapping, names: Sequence[str] | None = None) -> Point:
        names = self.continuous_names() if names is None else [self.resolve_name(n) for n in names]
        return graph.grad(self.logp_graph, names, point)

    def logp_and_dlogp(self, point: Mapping, names: Sequence[str] | None = None):
        names = self.continuous_names() if names is None else [self.resolve_name(n) for n in names]
        value, g = graph.value_and_grad(self.logp_graph, names, point)
        return float(value), g

    # --- variable bookkeeping ------------------------------------------------

    def var(self, name: str) -> FreeVar:
        if self._var_index_size != len(self.free_vars):
            self._var_index = {}
            for v in self.free_vars:
                self._var_index[v.name] = v
                self._var_index[v.sampling_name] = v
            self._var_index_size = len(self.free_vars)
        try:
            return self._var_index[name]
        except KeyError:
            raise UnknownVariable(f"no free variable named {name!r}") from None

    def resolve_name(self, name: str) -> str:
        return self.var(name).sampling_name

    def resolve_names(self, names) -> list[str]:
        out = []
        for n in names:
            v = n.sampling_name if isinstance(n, FreeVar) else self.resolve_name(n)
            if v not in out:
                out.append(v)
        return out

    def sampling_names(self) -> list[str]:
        return [v.sampling_name for v in self.free_vars]

    def continuous_names(self) -> list[str]:
        return [v.sampling_name for v in self.free_vars if v.dtype == "float"]

    def discrete_names(self) -> list[str]:
        return [v.sampling_name for v in self.free_vars if v.dtype == "int"]

    def initial_point(self, start: Mapping | None = None) -> Point:
        """Test point overlaid with ``start``; accepts transformed names or
        untransformed aliases (aliases are forward-transformed)."""
        self.finalize()
        point = {k: np.array(v) for k, v in self._test_point.items()}
        if start:
            for v in self.free_vars:
                if v.sampling_name in start:
                    raw = np.asarray(start[v.sampling_name])
                elif v.transform is not None and v.name in start:
                    raw = np.asarray(v.transform.forward(np.asarray(start[v.name])))
                else:
                    continue
                if raw.shape != v.shape:
                    raise ShapeMismatch(
                        f"start value for {v.sampling_name!r}: expected {v.shape}, got {raw.shape}")
                point[v.sampling_name] = raw.astype(np.int64 if v.dtype == "int" else np.float64)
        return point

    # --- trace support ---------------------------------------------------------

    def trace_layout(self) -> list[tuple[str, tuple, str]]:
        """Ordered (name, shape, dtype) entries recorded per draw: sampling
        coordinates, untransformed aliases, then deterministics."""
        layout = []
        for v in self.free_vars:
            layout.append((v.sampling_name, v.shape, v.dtype))
            if v.transform is not None:
                layout.append((v.name, v.shape, "float"))
        for name, expr in self.deterministics:
            layout.append((name, expr.shape, expr.dtype))
        return layout

    def expand_point(self, point: Mapping) -> Point:
        """Add untransformed aliases and deterministic values to a sampling point."""
        row: Point = {}
        for v in self.free_vars:
            val = np.asarray(point[v.sampling_name])
            row[v.sampling_name] = val
            if v.transform is not None:
                row[v.name] = np.asarray(v.transform.backward(val))
        for name, expr in self.deterministics:
            row[name] = np.asarray(eval_expr(expr, point))
        return row
