"""MCMC transition kernels.

All kernels are pure functions of (state, point, rng stream): with the same
seed a chain reproduces bit-for-bit.  One kernel instance serves one chain;
``clone()`` produces a fresh-state copy for additional chains.
"""

from __future__ import annotations

import math
from typing import Mapping, Sequence

import numpy as np

from .exceptions import (
    IntegerDifferentiation,
    NonFiniteGradient,
    NonFiniteLogp,
    OverlappingTargets,
    UncoveredVariable,
)
from .graph import Point
from .model import Model


class Packer:
    """Flattens a fixed set of named arrays into one vector and back."""

    def __init__(self, entries: Sequence[tuple[str, tuple]]):
        self.names = [e[0] for e in entries]
        self.shapes = [tuple(e[1]) for e in entries]
        self.sizes = [int(np.prod(s, dtype=int)) if s else 1 for s in self.shapes]
        self.offsets = np.cumsum([0] + self.sizes).tolist()
        self.size = self.offsets[-1]

    def pack(self, point: Mapping) -> np.ndarray:
        out = np.empty(self.size)
        for name, shape, size, off in zip(self.names, self.shapes, self.sizes, self.offsets):
            out[off:off + size] = np.asarray(point[name], dtype=np.float64).reshape(size)
        return out

    def unpack(self, vec: np.ndarray) -> Point:
        return {name: vec[off:off + size].reshape(shape).copy()
                for name, shape, size, off
                in zip(self.names, self.shapes, self.sizes, self.offsets)}

    def update_point(self, point: dict, vec: np.ndarray) -> dict:
        point.update(self.unpack(vec))
        return point


def _entries_for(model: Model, names: Sequence[str]) -> list[tuple[str, tuple]]:
    return [(n, model.var(n).shape) for n in names]


# --- Hessian-based scaling --------------------------------------------------

def hessian_diag(model: Model, point: Mapping, vars: Sequence[str] | None = None) -> np.ndarray:
    """Unclipped negative-Hessian diagonal of the log posterior (curvature),
    by central differences of the reverse-mode gradient."""
    model.finalize()
    names = model.continuous_names() if vars is None else model.resolve_names(vars)
    packer = Packer(_entries_for(model, names))
    work = model.initial_point(point)
    x = packer.pack(work)

    def grad_at(vec):
        packer.update_point(work, vec)
        return packer.pack(model.dlogp(work, names))

    diag = np.empty(packer.size)
    for i in range(packer.size):
        h = 1e-4 * max(1.0, abs(x[i]))
        xp, xm = x.copy(), x.copy()
        xp[i] += h
        xm[i] -= h
        diag[i] = (grad_at(xp)[i] - grad_at(xm)[i]) / (2.0 * h)
    return -diag


def scaling_from_point(model: Model, point: Mapping,
                       vars: Sequence[str] | None = None) -> np.ndarray:
    """Momentum scaling vector: curvature floored at 1e-8."""
    return np.maximum(hessian_diag(model, point, vars), 1e-8)


# --- leapfrog ----------------------------------------------------------------

def _leapfrog_raw(logp_grad, q, p, eps, inv_mass, grad_q=None):
    if grad_q is None:
        _, grad_q = logp_grad(q)
    p_half = p + 0.5 * eps * grad_q
    q_new = q + eps * p_half * inv_mass
    lp_new, g_new = logp_grad(q_new)
    p_new = p_half + 0.5 * eps * g_new
    return q_new, p_new, lp_new, g_new


def leapfrog(model: Model, q: Mapping, p: Mapping, eps: float, mass,
             vars: Sequence[str] | None = None) -> tuple[Point, Point]:
    """One leapfrog step of Hamiltonian dynamics for the named variables.

    ``q`` is a position point, ``p`` a momentum point with the same keys and
    shapes; ``mass`` is a scalar or packed vector (momentum covariance).
    """
    model.finalize()
    names = model.continuous_names() if vars is None else model.resolve_names(vars)
    packer = Packer(_entries_for(model, names))
    work = model.initial_point(q)
    mass_vec = np.broadcast_to(np.asarray(mass, dtype=np.float64), (packer.size,))

    def logp_grad(vec):
        packer.update_point(work, vec)
        lp, g = model.logp_and_dlogp(work, names)
        return lp, packer.pack(g)

    q_new, p_new, _, _ = _leapfrog_raw(logp_grad, packer.pack(work), packer.pack(p),
                                       eps, 1.0 / mass_vec)
    return packer.unpack(q_new), packer.unpack(p_new)


# --- step method base ---------------------------------------------------------

class StepMethod:
    def __init__(self, model: Model, vars=None):
        model.finalize()
        self.model = model
        if vars is None:
            self.vars = list(self._default_vars(model))
        else:
            self.vars = model.resolve_names(vars)
        self._init_kwargs: dict = {}

    def _default_vars(self, model):
        return model.sampling_names()

    def step(self, point: dict, rng: np.random.Generator, tuning: bool) -> dict:
        raise NotImplementedError

    def clone(self) -> "StepMethod":
        return type(self)(self.model, **self._init_kwargs)


def _round_half_away(x: np.ndarray) -> np.ndarray:
    return (np.sign(x) * np.floor(np.abs(x) + 0.5)).astype(np.int64)


class Metropolis(StepMethod):
    """Random-walk Metropolis with acceptance-rate proposal scaling.

    Integer variables get their Gaussian increment rounded to the nearest
    integer, ties away from zero.  Every ``tune_interval`` proposals made
    while tuning, every scale is multiplied by the classic schedule factor
    for the observed acceptance rate.
    """

    def __init__(self, model, vars=None, scale=1.0, tune_interval=100):
        super().__init__(model, vars)
        self._init_kwargs = dict(vars=list(self.vars), scale=scale,
                                 tune_interval=tune_interval)
        if isinstance(scale, Mapping):
            self.scales = {n: float(scale[n]) for n in self.vars}
        else:
            self.scales = {n: float(scale) for n in self.vars}
        for n, s in self.scales.items():
            if s <= 0:
                raise ValueError(f"proposal scale for {n!r} must be positive")
        self.tune_interval = int(tune_interval)
        self.accept_count = 0
        self.total_count = 0
        self.last_accepted = False

    @staticmethod
    def tune_factor(acc_rate: float) -> float:
        if acc_rate < 0.001:
            return 0.1
        if acc_rate < 0.05:
            return 0.5
        if acc_rate < 0.2:
            return 0.9
        if acc_rate > 0.95:
            return 10.0
        if acc_rate > 0.75:
            return 2.0
        if acc_rate > 0.5:
            return 1.1
        return 1.0

    def step(self, point, rng, tuning=False):
        lp_old = self.model.logp(point)
        proposal = dict(point)
        for name in self.vars:
            var = self.model.var(name)
            delta = self.scales[name] * rng.standard_normal(var.shape)
            if var.dtype == "int":
                proposal[name] = np.asarray(point[name]) + _round_half_away(delta)
            else:
                proposal[name] = np.asarray(point[name]) + delta
        lp_new = self.model.logp(proposal)
        accept = np.log(rng.random()) < lp_new - lp_old
        self.total_count += 1
        self.last_accepted = bool(accept)
        if accept:
            point = proposal
            self.accept_count += 1
        if tuning and self.total_count >= self.tune_interval:
            factor = self.tune_factor(self.accept_count / self.total_count)
            for n in self.scales:
                self.scales[n] *= factor
            self.accept_count = 0
            self.total_count = 0
        return point


class Slice(StepMethod):
    """Univariate slice sampler with geometric step-out and shrinkage,
    applied coordinate-wise to each target variable."""

    MAX_EXPANSIONS = 1000

    def __init__(self, model, vars=None, width=1.0):
        super().__init__(model, vars)
        self._init_kwargs = dict(vars=list(self.vars), width=width)
        for n in self.vars:
            if self.model.var(n).dtype == "int":
                raise IntegerDifferentiation(
                    f"slice sampling needs a continuous variable, got {n!r}")
        self.width = float(width)

    def _default_vars(self, model):
        return model.continuous_names()

    def step(self, point, rng, tuning=False):
        point = {k: np.array(v) for k, v in point.items()}
        lp = self.model.logp(point)
        if not np.isfinite(lp):
            raise NonFiniteLogp(f"slice sampler started at logp={lp}")
        for name in self.vars:
            arr = point[name]
            if arr.shape == ():
                lp = self._update_coord(point, name, (), lp, rng)
            else:
                for idx in np.ndindex(arr.shape):
                    lp = self._update_coord(point, name, idx, lp, rng)
        return point

    def _coord_logp(self, point, name, idx, value):
        if idx == ():
            point[name] = np.asarray(value, dtype=np.float64)
        else:
            point[name][idx] = value
        return self.model.logp(point)

    def _update_coord(self, point, name, idx, lp, rng):
        x0 = float(point[name][idx]) if idx != () else float(point[name])
        log_u = lp + math.log(rng.random())
        left = x0 - self.width * rng.random()
        right = left + self.width

        w = self.width
        for _ in range(self.MAX_EXPANSIONS):
            if self._coord_logp(point, name, idx, left) <= log_u:
                break
            left -= w
            w *= 2.0
        w = self.width
        for _ in range(self.MAX_EXPANSIONS):
            if self._coord_logp(point, name, idx, right) <= log_u:
                break
            right += w
            w *= 2.0

        while True:
            x1 = left + (right - left) * rng.random()
            lp1 = self._coord_logp(point, name, idx, x1)
            if lp1 >= log_u:
                return lp1
            if x1 > x0:
                right = x1
            elif x1 < x0:
                left = x1
            if right - left < 1e-300 or x1 == x0:
                # degenerate shrink: the current point is always in the slice
                return self._coord_logp(point, name, idx, x0)


class GradientStep(StepMethod):
    """Shared machinery for HMC-family kernels: packing, mass handling,
    cached log-density-and-gradient evaluations."""

    def __init__(self, model, vars=None, scaling=None):
        super().__init__(model, vars)
        for n in self.vars:
            if self.model.var(n).dtype == "int":
                raise IntegerDifferentiation(
                    f"gradient-based sampler cannot target integer variable {n!r}")
        self.packer = Packer(_entries_for(model, self.vars))
        if scaling is None:
            scaling = model.test_point
        if isinstance(scaling, Mapping):
            mass = scaling_from_point(model, scaling, self.vars)
        else:
            mass = np.broadcast_to(np.asarray(scaling, dtype=np.float64),
                                   (self.packer.size,)).copy()
            if np.any(mass <= 0):
                raise ValueError("scaling vector must be strictly positive")
        self.mass = mass
        self.inv_mass = 1.0 / mass
        self._work: dict | None = None

    def _logp_grad(self, vec):
        self.packer.update_point(self._work, vec)
        lp, g = self.model.logp_and_dlogp(self._work, self.vars)
        return lp, self.packer.pack(g)

    def _begin(self, point):
        self._work = dict(point)
        return self.packer.pack(point)

    def _momentum(self, rng):
        return np.sqrt(self.mass) * rng.standard_normal(self.packer.size)

    def _kinetic(self, p):
        return 0.5 * float(np.dot(p * self.inv_mass, p))


class Hmc(GradientStep):
    """Plain Hamiltonian Monte Carlo with a fixed step size and path length."""

    def __init__(self, model, vars=None, scaling=None, step_size=0.25, n_steps=4):
        super().__init__(model, vars, scaling)
        self._init_kwargs = dict(vars=list(self.vars), scaling=np.array(self.mass),
                                 step_size=step_size, n_steps=n_steps)
        if step_size <= 0 or n_steps < 1:
            raise ValueError("step_size must be positive and n_steps >= 1")
        self.step_size = float(step_size)
        self.n_steps = int(n_steps)
        self.last_accepted = False

    def step(self, point, rng, tuning=False):
        q = self._begin(point)
        lp, g = self._logp_grad(q)
        if not np.isfinite(lp):
            raise NonFiniteLogp(f"HMC started at logp={lp}")
        if not np.all(np.isfinite(g)):
            raise NonFiniteGradient("HMC started at a point with non-finite gradient")
        p = self._momentum(rng)
        h0 = lp - self._kinetic(p)
        q_new, p_new, lp_new, g_new = q, p, lp, g
        for _ in range(self.n_steps):
            q_new, p_new, lp_new, g_new = _leapfrog_raw(
                self._logp_grad, q_new, p_new, self.step_size, self.inv_mass, g_new)
        h1 = lp_new - self._kinetic(p_new)
        accept = np.log(rng.random()) < h1 - h0
        self.last_accepted = bool(accept)
        out = q_new if accept else q
        return self.packer.update_point(dict(point), out)


class _TreeState:
    __slots__ = ("q", "p", "lp", "grad")

    def __init__(self, q, p, lp, grad):
        self.q = q
        self.p = p
        self.lp = lp
        self.grad = grad


def no_uturn(dq: np.ndarray, p_minus: np.ndarray, p_plus: np.ndarray) -> bool:
    """Doubling may continue while the momentum at both trajectory ends still
    points along the span dq = q_plus - q_minus; p . dq <= 0 at either end
    stops it."""
    return float(np.dot(dq, p_minus)) > 0.0 and float(np.dot(dq, p_plus)) > 0.0


class Nuts(GradientStep):
    """No-U-Turn sampler: dynamic trajectory doubling with slice selection and
    dual-averaging step-size adaptation during warm-up.

    ``scaling`` may be a point (curvature is measured there) or an explicit
    positive vector; ``gamma`` is the dual-averaging shrinkage strength.
    """

    def __init__(self, model, vars=None, scaling=None, step_size=None,
                 target_accept=0.8, gamma=0.05, t0=10, kappa=0.75,
                 max_depth=10, max_energy_error=1000.0):
        super().__init__(model, vars, scaling)
        self._init_kwargs = dict(vars=list(self.vars), scaling=np.array(self.mass),
                                 step_size=step_size, target_accept=target_accept,
                                 gamma=gamma, t0=t0, kappa=kappa, max_depth=max_depth,
                                 max_energy_error=max_energy_error)
        self.step_size = step_size
        self.target_accept = float(target_accept)
        self.gamma = float(gamma)
        self.t0 = float(t0)
        self.kappa = float(kappa)
        self.max_depth = int(max_depth)
        self.max_energy_error = float(max_energy_error)
        self._mu = None
        self._h_bar = 0.0
        self._log_eps_bar = 0.0
        self._m = 0
        self.last_accept_stat = None
        self.last_depth = 0

    # step-size heuristic: double or halve until one leapfrog step has
    # acceptance ratio straddling 0.5
    def _find_reasonable_eps(self, q, lp, g, rng):
        eps = 1.0
        p = self._momentum(rng)
        h0 = lp - self._kinetic(p)

        def ratio(e):
            _, p1, lp1, _ = _leapfrog_raw(self._logp_grad, q, p, e, self.inv_mass, g)
            h1 = lp1 - self._kinetic(p1)
            d = h1 - h0
            return d if np.isfinite(d) else -np.inf

        a = 1.0 if ratio(eps) > math.log(0.5) else -1.0
        for _ in range(100):
            if a * ratio(eps) <= -a * math.log(2.0):
                break
            eps *= 2.0 ** a
            if not 1e-10 < eps < 1e10:
                break
        return eps

    def _ensure_init(self, q, lp, g, rng):
        if not np.isfinite(lp):
            raise NonFiniteLogp(f"NUTS started at logp={lp}")
        if not np.all(np.isfinite(g)):
            raise NonFiniteGradient("NUTS started at a point with non-finite gradient")
        if self._mu is None:
            if self.step_size is None:
                self.step_size = self._find_reasonable_eps(q, lp, g, rng)
            self._mu = math.log(10.0 * self.step_size)

    def _build_tree(self, state, log_u, direction, depth, eps, h0, rng):
        """Returns (left, right, proposal, n_valid, keep_going, alpha, n_alpha)."""
        if depth == 0:
            q, p, lp, g = _leapfrog_raw(self._logp_grad, state.q, state.p,
                                        direction * eps, self.inv_mass, state.grad)
            node = _TreeState(q, p, lp, g)
            h = lp - self._kinetic(p) if np.isfinite(lp) else -np.inf
            n_valid = int(log_u <= h)
            keep = h - log_u > -self.max_energy_error
            alpha = min(1.0, math.exp(min(h - h0, 0.0))) if np.isfinite(h) else 0.0
            return node, node, node, n_valid, keep, alpha, 1

        left, right, prop, n1, keep, alpha, n_alpha = self._build_tree(
            state, log_u, direction, depth - 1, eps, h0, rng)
        if keep:
            if direction == -1:
                left, _, prop2, n2, keep2, alpha2, n_alpha2 = self._build_tree(
                    left, log_u, direction, depth - 1, eps, h0, rng)
            else:
                _, right, prop2, n2, keep2, alpha2, n_alpha2 = self._build_tree(
                    right, log_u, direction, depth - 1, eps, h0, rng)
            if n2 > 0 and rng.random() < n2 / max(n1 + n2, 1):
                prop = prop2
            keep = keep2 and no_uturn(right.q - left.q, left.p, right.p)
            n1 += n2
            alpha += alpha2
            n_alpha += n_alpha2
        return left, right, prop, n1, keep, alpha, n_alpha

    def step(self, point, rng, tuning=False):
        q = self._begin(point)
        lp, g = self._logp_grad(q)
        self._ensure_init(q, lp, g, rng)
        eps = self.step_size if (tuning or self._m == 0) else math.exp(self._log_eps_bar)

        p0 = self._momentum(rng)
        h0 = lp - self._kinetic(p0)
        log_u = h0 + math.log(rng.random())

        current = _TreeState(q, p0, lp, g)
        left = right = current
        chosen = current
        n = 1
        depth = 0
        alpha, n_alpha = 0.0, 1
        keep = True
        while keep and depth < self.max_depth:
            direction = 1 if rng.random() < 0.5 else -1
            start = left if direction == -1 else right
            if direction == -1:
                left, _, prop, n_new, keep_sub, alpha, n_alpha = self._build_tree(
                    start, log_u, direction, depth, eps, h0, rng)
            else:
                _, right, prop, n_new, keep_sub, alpha, n_alpha = self._build_tree(
                    start, log_u, direction, depth, eps, h0, rng)
            if keep_sub and n_new > 0 and rng.random() < min(1.0, n_new / n):
                chosen = prop
            n += n_new
            keep = keep_sub and no_uturn(right.q - left.q, left.p, right.p)
            depth += 1
        self.last_depth = depth
        self.last_accept_stat = alpha / n_alpha

        if tuning:
            self._m += 1
            eta = 1.0 / (self._m + self.t0)
            self._h_bar = (1.0 - eta) * self._h_bar + eta * (self.target_accept
                                                             - self.last_accept_stat)
            log_eps = self._mu - math.sqrt(self._m) / self.gamma * self._h_bar
            w = self._m ** (-self.kappa)
            self._log_eps_bar = w * log_eps + (1.0 - w) * self._log_eps_bar
            self.step_size = math.exp(log_eps)

        return self.packer.update_point(dict(point), chosen.q)


class CompoundStep:
    """Applies several step methods in order; targets must not overlap."""

    def __init__(self, steps: Sequence[StepMethod]):
        self.steps = list(steps)
        seen: set[str] = set()
        for s in self.steps:
            dup = seen.intersection(s.vars)
            if dup:
                raise OverlappingTargets(f"variables targeted twice: {sorted(dup)}")
            seen.update(s.vars)
        self.vars = [v for s in self.steps for v in s.vars]

    def step(self, point, rng, tuning=False):
        for s in self.steps:
            point = s.step(point, rng, tuning)
        return point

    def clone(self):
        return CompoundStep([s.clone() for s in self.steps])


def flatten_steps(steps) -> list:
    if isinstance(steps, (StepMethod, CompoundStep)):
        steps = [steps]
    out = []
    for s in steps:
        if isinstance(s, CompoundStep):
            out.extend(s.steps)
        else:
            out.append(s)
    return out


def validate_coverage(model: Model, steps) -> None:
    """Union of step targets must cover every free variable, with no overlaps."""
    flat = flatten_steps(steps)
    seen: set[str] = set()
    for s in flat:
        dup = seen.intersection(s.vars)
        if dup:
            raise OverlappingTargets(f"variables targeted twice: {sorted(dup)}")
        seen.update(s.vars)
    missing = [n for n in model.sampling_names() if n not in seen]
    if missing:
        raise UncoveredVariable(f"no step method targets {missing[0]!r}")
