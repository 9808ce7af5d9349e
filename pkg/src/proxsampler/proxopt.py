"""Proximal map, proximal point method and Moreau envelope.

``prox(f, eta, y) = argmin_x f(x) + |x - y|^2 / (2 eta)``.  The map is
computed in closed form when the potential provides it, by gradient descent
when the proximal objective is certified strongly convex, and, for 1-D
non-convex objectives, by a global grid search followed by root polishing.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import MultivaluedProxError, ValidationError
from .potential import Potential
from .rgo import DEFAULT_MAX_ITER, _composite_minimize

PROX_TOL = 1e-11
SEARCH_NODES = 4001


def _prox_convex(f: Potential, eta: float) -> bool:
    low = f.regularity.lower_curvature
    return low is not None and low + 1.0 / eta > 0


def _global_prox_1d(f: Potential, eta: float, y: float) -> float:
    if f.fmin is None or f.grad is None:
        raise ValidationError(
            f"prox of non-convex {f.name!r} needs its minimum value and gradient")

    def g(z):
        z = np.atleast_1d(z)
        return f.fun(z[:, None]) + (z - y) ** 2 / (2 * eta)

    def dg(z):
        return float(f.grad(np.array([[z]]))[0, 0] + (z - y) / eta)

    # any minimizer z has (z - y)^2 / (2 eta) <= f(y) - f*
    radius = np.sqrt(2 * eta * max(float(g(y)[0]) - f.fmin, 0.0)) + 1e-12
    z = np.linspace(y - radius, y + radius, SEARCH_NODES)
    gz = g(z)
    lower = np.r_[True, gz[1:] <= gz[:-1]]
    upper = np.r_[gz[:-1] <= gz[1:], True]
    cand = []
    for i in np.flatnonzero(lower & upper):
        a, b = z[max(i - 1, 0)], z[min(i + 1, z.size - 1)]
        da, db = dg(a), dg(b)
        if da <= 0 <= db and da != db:
            zi = brentq(dg, a, b, xtol=1e-15, rtol=4 * np.finfo(float).eps)
        else:
            zi = z[i]
        cand.append((float(g(zi)[0]), float(zi)))
    cand.sort()
    best_val, best_z = cand[0]
    for val, zi in cand[1:]:
        if val - best_val <= 1e-12 * max(1.0, abs(best_val)) and abs(zi - best_z) > 1e-6:
            raise MultivaluedProxError(
                f"prox of {f.name!r} at y={y:.6g}, eta={eta:g} has minimizers {best_z:.6g} and {zi:.6g}")
    return best_z


def prox_batch(f: Potential, eta: float, Y, tol: float = PROX_TOL,
               max_iter: int = DEFAULT_MAX_ITER, chain_ids=None) -> np.ndarray:
    """Row-wise proximal map of ``eta f`` applied to ``Y`` of shape (n, d)."""
    if not eta > 0:
        raise ValidationError("eta must be positive")
    Y = np.asarray(Y, dtype=float)
    if Y.ndim != 2 or Y.shape[1] != f.dim:
        raise ValidationError(f"Y must have shape (n, {f.dim})")
    if f.analytic_prox is not None or _prox_convex(f, eta):
        return _composite_minimize(f, Y, eta, Y.copy(), tol, max_iter, chain_ids)[0]
    if f.dim != 1:
        raise ValidationError(
            f"prox of {f.name!r} at eta={eta:g} is not certified convex; only 1-D global search is supported")
    return np.array([[_global_prox_1d(f, eta, float(y))] for y in Y[:, 0]])


def prox(f: Potential, eta: float, y, tol: float = PROX_TOL) -> np.ndarray:
    y = np.asarray(y, dtype=float).reshape(1, f.dim)
    return prox_batch(f, eta, y, tol)[0]


def prox_residual(f: Potential, eta: float, y, z) -> float:
    """Distance of 0 from the subdifferential of the proximal objective at z."""
    y = np.asarray(y, dtype=float).reshape(1, f.dim)
    z = np.asarray(z, dtype=float).reshape(1, f.dim)
    return float(f.stationarity(z, (z - y) / eta)[0])


@dataclass
class ProxTrajectory:
    iterates: np.ndarray      # (K + 1, d)
    values: np.ndarray        # f at each iterate
    residuals: np.ndarray     # stationarity residual of each step; nan at k = 0

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            write_trajectory_rows(self, fh)


def write_trajectory_rows(traj: ProxTrajectory, fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["k", "f_value", "residual"])
    for k, (v, r) in enumerate(zip(traj.values, traj.residuals)):
        w.writerow([k, f"{v:.17g}", "" if np.isnan(r) else f"{r:.17g}"])


def prox_point_run(f: Potential, eta: float, x0, K: int, tol: float = PROX_TOL) -> ProxTrajectory:
    """``K`` steps of ``x_{k+1} = prox_{eta f}(x_k)``."""
    if int(K) != K or K < 0:
        raise ValidationError("K must be a nonnegative integer")
    xs = [np.asarray(x0, dtype=float).reshape(f.dim)]
    res = [np.nan]
    for _ in range(int(K)):
        x_new = prox(f, eta, xs[-1], tol)
        res.append(prox_residual(f, eta, xs[-1], x_new))
        xs.append(x_new)
    X = np.array(xs)
    return ProxTrajectory(X, f.fun(X), np.array(res))


def moreau_envelope(f: Potential, t: float, x, tol: float = PROX_TOL) -> float:
    """``min_z f(z) + |z - x|^2 / (2 t)``."""
    x = np.asarray(x, dtype=float).reshape(f.dim)
    z = prox(f, t, x, tol)
    return float(f.value(z) + np.sum((z - x) ** 2) / (2 * t))


def pl_contraction_check(f: Potential, eta: float, x) -> float:
    """``(f(x') - f*) / (f(x) - f*)`` with ``x' = prox_{eta f}(x)``.

    Under alpha-PL this is at most ``(1 + alpha eta)^-2``.
    """
    if f.fmin is None:
        raise ValidationError("the PL ratio needs the known minimum value f*")
    x = np.asarray(x, dtype=float).reshape(f.dim)
    gap = f.value(x) - f.fmin
    if not gap > 0:
        raise ValidationError("ratio undefined: f(x) = f*")
    return float((f.value(prox(f, eta, x)) - f.fmin) / gap)


def prox_contraction_check(f: Potential, eta: float, x, y) -> float:
    """``|prox(x) - prox(y)| / |x - y|``; at most ``1 / (1 + alpha eta)``."""
    x = np.asarray(x, dtype=float).reshape(f.dim)
    y = np.asarray(y, dtype=float).reshape(f.dim)
    dist = np.linalg.norm(x - y)
    if dist == 0:
        raise ValidationError("ratio undefined: x = y")
    P = prox_batch(f, eta, np.stack([x, y]))
    return float(np.linalg.norm(P[0] - P[1]) / dist)


def hamilton_jacobi_check(f: Potential, x, t_grid, h: float = 1e-4) -> float:
    """Max over ``t`` of ``|d/dt env_t(x) + |x_t - x|^2 / (2 t^2)|``.

    The time derivative is a central difference with step ``h``.
    """
    if f.grad is None:
        raise ValidationError("the Hamilton-Jacobi check needs a smooth potential")
    x = np.asarray(x, dtype=float).reshape(f.dim)
    worst = 0.0
    for t in np.atleast_1d(np.asarray(t_grid, dtype=float)):
        if not t > h:
            raise ValidationError("every t must exceed the difference step h")
        dt = (moreau_envelope(f, t + h, x) - moreau_envelope(f, t - h, x)) / (2 * h)
        xt = prox(f, t, x)
        worst = max(worst, abs(dt + np.sum((xt - x) ** 2) / (2 * t * t)))
    return float(worst)
