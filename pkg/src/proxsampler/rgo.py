"""Restricted Gaussian oracle: exact sampling from

    pi(x | y)  ∝  exp(-(f(x) + |x - y|^2 / (2 eta)) / eps)

by minimizing the (strongly convex) exponent and rejection sampling from a
Gaussian proposal centred at the minimizer with the exponent's declared
strong-convexity constant as precision.

Every routine is batched over rows.  Randomness comes either from a single
``numpy.random.Generator`` (rows drawn together, fastest) or from a sequence
of per-row generators, in which case each row consumes only its own stream
and results do not depend on how rows are grouped into batches.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Sequence, Union

import numpy as np

from .errors import (CapabilityError, ContractViolation, ConvergenceError,
                     RunawayRejectionError, ValidationError)
from .potential import CompositePotential, Potential, composite

log = logging.getLogger(__name__)

Array = np.ndarray
RNG = Union[np.random.Generator, Sequence[np.random.Generator]]

DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 10_000
DEFAULT_MAX_TRIALS = 10**6
ACCEPT_SLACK = 1e-9


@dataclass
class RgoStats:
    calls: int = 0
    total_trials: int = 0
    total_inner_iterations: int = 0
    max_trials_single_call: int = 0

    def record(self, trials, iterations) -> None:
        trials = np.asarray(trials)
        self.calls += int(trials.size)
        self.total_trials += int(trials.sum())
        self.total_inner_iterations += int(np.sum(iterations))
        if trials.size:
            self.max_trials_single_call = max(self.max_trials_single_call, int(trials.max()))

    def merge(self, other: "RgoStats") -> None:
        self.calls += other.calls
        self.total_trials += other.total_trials
        self.total_inner_iterations += other.total_inner_iterations
        self.max_trials_single_call = max(self.max_trials_single_call, other.max_trials_single_call)

    @property
    def mean_trials(self) -> float:
        return self.total_trials / self.calls if self.calls else float("nan")


def _normals(rng: RNG, rows: Array, d: int) -> Array:
    if isinstance(rng, np.random.Generator):
        return rng.standard_normal((rows.size, d))
    out = np.empty((rows.size, d))
    for i, r in enumerate(rows):
        out[i] = rng[r].standard_normal(d)
    return out


def _uniforms(rng: RNG, rows: Array) -> Array:
    if isinstance(rng, np.random.Generator):
        return rng.random(rows.size)
    return np.array([rng[r].random() for r in rows])


# -- inner minimization ------------------------------------------------------

def _descend(fun: Callable[[Array, Array], Array], grad: Callable[[Array, Array], Array],
             X0: Array, tol: float, max_iter: int, step0: float,
             chain_ids: Array | None = None) -> tuple[Array, Array]:
    """Row-wise gradient descent with Armijo backtracking.

    ``fun(X, rows)`` and ``grad(X, rows)`` evaluate rows ``rows`` of the
    batch problem at ``X``.  Converged rows are frozen.
    """
    X = np.array(X0, dtype=float, copy=True)
    n = X.shape[0]
    rows_all = np.arange(n)
    iters = np.zeros(n, dtype=int)
    step = np.full(n, float(step0))
    F = fun(X, rows_all)
    G = grad(X, rows_all)
    gn = np.linalg.norm(G, axis=1)
    done = gn <= tol
    for _ in range(max_iter):
        act = np.flatnonzero(~done)
        if act.size == 0:
            break
        Xa, Fa, Ga = X[act], F[act], G[act]
        ga2 = gn[act] ** 2
        t = step[act]
        slack = 8 * np.finfo(float).eps * np.abs(Fa)

        def rejected(Fn, Gn, t, Fa, Ga, ga2, slack):
            armijo = Fn <= Fa - 0.5 * t * ga2
            # when f changes by less than round-off, use the gradient form of
            # the same test: the step must not pass the minimum along the line
            line = np.sum(Gn * Ga, axis=1) >= 0
            return ~np.where(np.abs(Fn - Fa) <= slack, line, armijo)

        Xn = Xa - t[:, None] * Ga
        Fn = fun(Xn, act)
        Gn = grad(Xn, act)
        gnn = np.linalg.norm(Gn, axis=1)
        bad = rejected(Fn, Gn, t, Fa, Ga, ga2, slack)
        for _ in range(80):
            if not bad.any():
                break
            b = np.flatnonzero(bad)
            t[b] *= 0.5
            Xn[b] = Xa[b] - t[b, None] * Ga[b]
            Fn[b] = fun(Xn[b], act[b])
            Gn[b] = grad(Xn[b], act[b])
            gnn[b] = np.linalg.norm(Gn[b], axis=1)
            bad[b] = rejected(Fn[b], Gn[b], t[b], Fa[b], Ga[b], ga2[b], slack[b])
        # grow the step only on clear progress, never on round-off-level moves
        clear = (Fn <= Fa - 0.5 * t * ga2) & (Fa - Fn > 1e3 * slack)
        step[act] = np.where(clear, 2.0 * t, t)
        X[act], F[act], G[act], gn[act] = Xn, Fn, Gn, gnn
        iters[act] += 1
        done[act] = gn[act] <= tol
    if not done.all():
        bad_row = int(np.flatnonzero(~done)[0])
        cid = int(chain_ids[bad_row]) if chain_ids is not None else None
        raise ConvergenceError(
            f"inner minimization did not reach gradient norm {tol:g} in {max_iter} iterations "
            f"(residual {gn[bad_row]:.3e})",
            last_iterate=X[bad_row].copy(), residual=float(gn[bad_row]), chain=cid)
    return X, iters


def _initial_step(reg) -> float:
    beta = reg.beta_smoothness
    return 1.0 / beta if beta else 1.0


def _composite_minimize(f: Potential, Y: Array, eta: float, X0: Array, tol: float,
                        max_iter: int, chain_ids=None) -> tuple[Array, Array]:
    """Minimize ``f(x) + |x - y|^2/(2 eta)`` for every row ``y`` of ``Y``."""
    if f.analytic_prox is not None:
        return f.analytic_prox(eta, Y), np.zeros(Y.shape[0], dtype=int)
    if f.grad is None:
        raise CapabilityError(f"potential {f.name!r} has neither gradient nor analytic prox")

    def fun(X, rows):
        return f.fun(X) + np.sum((X - Y[rows]) ** 2, axis=1) / (2 * eta)

    def grad(X, rows):
        return f.grad(X) + (X - Y[rows]) / eta

    beta = f.regularity.beta_smoothness
    step0 = 1.0 / (beta + 1.0 / eta) if beta else min(1.0, eta)
    return _descend(fun, grad, X0, tol, max_iter, step0, chain_ids)


def inner_minimize(ft: Potential, x_init, tol: float = DEFAULT_TOL,
                   max_iter: int = DEFAULT_MAX_ITER) -> tuple[Array, int]:
    """Minimizer of a strongly convex potential and the iterations spent.

    For a :class:`CompositePotential` whose base has an analytic prox the
    prox is returned exactly with zero iterations.  For composites the
    tolerance applies to the gradient of ``f + |x - y|^2/(2 eta)`` before
    division by ``eps``, which leaves the minimizer unchanged.
    """
    if ft.regularity.alpha_strong_convexity is None or not ft.regularity.alpha_strong_convexity > 0:
        raise ValidationError("inner_minimize needs a declared positive strong-convexity constant")
    x_init = np.asarray(x_init, dtype=float).reshape(1, ft.dim)
    if isinstance(ft, CompositePotential):
        X, it = _composite_minimize(ft.base, ft.center[None, :], ft.eta, x_init, tol, max_iter)
    else:
        if ft.grad is None:
            raise CapabilityError(f"potential {ft.name!r} has no gradient")
        X, it = _descend(lambda X, rows: ft.fun(X), lambda X, rows: ft.grad(X),
                         x_init, tol, max_iter, _initial_step(ft.regularity))
    return X[0], int(it[0])


# -- rejection sampling ------------------------------------------------------

def _reject(gap: Callable[[Array, Array], Array], X_star: Array, alpha_tilde: float,
            rng: RNG, max_trials: int, chain_ids: Array | None = None,
            tol_extra: Array | float = 0.0) -> tuple[Array, Array]:
    """Row-wise rejection sampling with proposal N(x*, I/alpha_tilde).

    ``gap(Z, rows)`` must return ``ft(Z) - ft(x*) - alpha_tilde/2 |Z - x*|^2``,
    the negative log acceptance probability, for the given rows.
    """
    n, d = X_star.shape
    out = np.empty_like(X_star)
    trials = np.zeros(n, dtype=int)
    pending = np.arange(n)
    scale = 1.0 / np.sqrt(alpha_tilde)
    tol_extra = np.broadcast_to(np.asarray(tol_extra, dtype=float), (n,))
    while pending.size:
        Z = X_star[pending] + scale * _normals(rng, pending, d)
        U = _uniforms(rng, pending)
        trials[pending] += 1
        g = gap(Z, pending)
        viol = g < -(ACCEPT_SLACK + tol_extra[pending])
        if viol.any():
            i = int(np.flatnonzero(viol)[0])
            row = int(pending[i])
            cid = int(chain_ids[row]) if chain_ids is not None else None
            raise ContractViolation(
                f"acceptance probability exp({-g[i]:.3e}) exceeds 1; "
                "check the declared strong convexity and the minimizer", chain=cid)
        acc = np.log(U) < -np.maximum(g, 0.0)
        out[pending[acc]] = Z[acc]
        pending = pending[~acc]
        if pending.size and trials[pending].max() >= max_trials:
            row = int(pending[np.argmax(trials[pending])])
            cid = int(chain_ids[row]) if chain_ids is not None else None
            raise RunawayRejectionError(f"no acceptance after {max_trials} trials", chain=cid)
    return out, trials


def rejection_sample(ft: Potential, x_star, alpha_tilde: float, rng: np.random.Generator,
                     max_trials: int = DEFAULT_MAX_TRIALS) -> tuple[Array, int]:
    """One exact draw from ``exp(-ft)`` and the number of proposals used."""
    if not alpha_tilde > 0:
        raise ValidationError("alpha_tilde must be positive")
    x_star = np.asarray(x_star, dtype=float).reshape(1, ft.dim)
    f_star = ft.fun(x_star)

    def gap(Z, rows):
        return ft.fun(Z) - f_star[rows] - 0.5 * alpha_tilde * np.sum((Z - x_star[rows]) ** 2, axis=1)

    tol = 8 * np.finfo(float).eps * np.abs(f_star)
    X, trials = _reject(gap, x_star, alpha_tilde, rng, max_trials, tol_extra=tol)
    return X[0], int(trials[0])


def _composite_alpha(f: Potential, eta: float, eps: float) -> float:
    low = f.regularity.lower_curvature
    if low is None or not low + 1.0 / eta > 0:
        raise ValidationError(
            f"RGO for {f.name!r} needs a declared curvature lower bound with "
            f"lower + 1/eta > 0 (eta={eta:g})")
    return (low + 1.0 / eta) / eps


def rgo_sample_batch(f: Potential, Y, eta: float, eps: float, rng: RNG,
                     stats: RgoStats | None = None, tol: float = DEFAULT_TOL,
                     max_iter: int = DEFAULT_MAX_ITER, max_trials: int = DEFAULT_MAX_TRIALS,
                     chain_ids=None) -> Array:
    """Draw ``x_i ~ pi_eps(x | y_i)`` independently for every row of ``Y``.

    With a sequence of generators, row ``i`` uses ``rng[i]``.
    """
    if not eta > 0 or not eps > 0:
        raise ValidationError("eta and eps must be positive")
    Y = np.asarray(Y, dtype=float)
    if Y.ndim != 2 or Y.shape[1] != f.dim:
        raise ValidationError(f"Y must have shape (n, {f.dim})")
    if not isinstance(rng, np.random.Generator) and len(rng) != Y.shape[0]:
        raise ValidationError("need one generator per row")
    alpha_t = _composite_alpha(f, eta, eps)
    X_star, iters = _composite_minimize(f, Y, eta, Y.copy(), tol, max_iter, chain_ids)
    # residual of the prox stationarity condition, logged for diagnostics
    if log.isEnabledFor(logging.DEBUG):
        res = f.stationarity(X_star, (X_star - Y) / eta)
        log.debug("RGO inner residual max %.3e over %d rows", float(res.max()), Y.shape[0])

    def c(X, rows):
        return f.fun(X) + np.sum((X - Y[rows]) ** 2, axis=1) / (2 * eta)

    all_rows = np.arange(Y.shape[0])
    c_star = c(X_star, all_rows)
    curv = alpha_t * eps

    def gap(Z, rows):
        sq = np.sum((Z - X_star[rows]) ** 2, axis=1)
        return (c(Z, rows) - c_star[rows] - 0.5 * curv * sq) / eps

    tol_extra = 8 * np.finfo(float).eps * np.abs(c_star) / eps
    X, trials = _reject(gap, X_star, alpha_t, rng, max_trials, chain_ids, tol_extra)
    if stats is not None:
        stats.record(trials, iters)
    return X


def rgo_sample(f: Potential, y, eta: float, eps: float, rng: np.random.Generator,
               stats: RgoStats | None = None, **kwargs) -> Array:
    """One exact draw from ``pi_eps(x | y)``; updates ``stats`` in place."""
    y = np.asarray(y, dtype=float).reshape(1, f.dim)
    return rgo_sample_batch(f, y, eta, eps, rng, stats, **kwargs)[0]


def rgo_target(f: Potential, y, eta: float, eps: float = 1.0) -> CompositePotential:
    """The potential whose Gibbs density the RGO samples."""
    return composite(f, y, eta, eps)
