"""Target potentials ``f`` for densities ``exp(-f)`` on R^d.

All callables on a :class:`Potential` are batch-first: they take an array of
shape ``(n, d)`` and return shape ``(n,)`` (values) or ``(n, d)`` (gradients,
prox outputs).  The convenience methods :meth:`Potential.value` and
:meth:`Potential.gradient` also accept a single point of shape ``(d,)``.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import ConfigError, ValidationError

Array = np.ndarray

INEQUALITY_CLASSES = ("SLC", "LC", "LSI", "PI", "LOI", "none")


@dataclass(frozen=True)
class RegularityInfo:
    """Declared regularity constants of a potential.

    ``curvature_lower`` is a lower bound on the Hessian spectrum and may be
    negative; it is what makes the proximal problem of a non-convex potential
    strongly convex for small enough step sizes.  ``smoothness_radius``, when
    set, restricts the validity of ``beta_smoothness`` to the box
    ``max_i |x_i| <= smoothness_radius``.
    """

    alpha_strong_convexity: Optional[float] = None
    beta_smoothness: Optional[float] = None
    lipschitz_M: Optional[float] = None
    pl_alpha: Optional[float] = None
    inequality: str = "none"
    inequality_constant: Optional[float] = None
    loi_order: Optional[float] = None
    curvature_lower: Optional[float] = None
    smoothness_radius: Optional[float] = None

    def __post_init__(self):
        if self.inequality not in INEQUALITY_CLASSES:
            raise ValidationError(f"unknown inequality class {self.inequality!r}")
        if self.alpha_strong_convexity is not None and self.alpha_strong_convexity < 0:
            raise ValidationError("alpha_strong_convexity must be nonnegative")
        for name in ("beta_smoothness", "lipschitz_M", "pl_alpha"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise ValidationError(f"{name} must be positive")
        if self.inequality == "LOI":
            r = self.loi_order
            if r is None or not 1.0 <= r <= 2.0:
                raise ValidationError("LOI requires loi_order r in [1, 2]")

    @property
    def lower_curvature(self) -> Optional[float]:
        """Best known lower bound on the Hessian spectrum."""
        if self.alpha_strong_convexity is not None:
            return self.alpha_strong_convexity
        return self.curvature_lower


@dataclass(frozen=True, eq=False)
class Potential:
    dim: int
    fun: Callable[[Array], Array]
    grad: Optional[Callable[[Array], Array]] = None
    analytic_prox: Optional[Callable[[float, Array], Array]] = None
    # distance from -v to the subdifferential at x, for non-smooth potentials
    subdiff_dist: Optional[Callable[[Array, Array], Array]] = None
    regularity: RegularityInfo = field(default_factory=RegularityInfo)
    name: str = "custom"
    params: tuple = ()
    fmin: Optional[float] = None
    argmin: Optional[Array] = None

    def __post_init__(self):
        if int(self.dim) != self.dim or self.dim < 1:
            raise ValidationError(f"dim must be a positive integer, got {self.dim!r}")

    def _batch(self, x) -> tuple[Array, bool]:
        x = np.asarray(x, dtype=float)
        single = x.ndim <= 1
        X = np.atleast_2d(x.reshape(1, -1) if single else x)
        if X.shape[1] != self.dim:
            raise ValidationError(f"expected points of dimension {self.dim}, got {X.shape[1]}")
        return X, single

    def value(self, x):
        X, single = self._batch(x)
        out = self.fun(X)
        return float(out[0]) if single else out

    def gradient(self, x):
        if self.grad is None:
            raise ValidationError(f"potential {self.name!r} has no gradient")
        X, single = self._batch(x)
        out = self.grad(X)
        return out[0] if single else out

    __call__ = value

    def stationarity(self, X: Array, V: Array) -> Array:
        """Per-row distance between ``-V`` and the (sub)gradient of f at ``X``."""
        if self.subdiff_dist is not None:
            return self.subdiff_dist(X, V)
        if self.grad is None:
            raise ValidationError(f"potential {self.name!r} has no gradient")
        return np.linalg.norm(self.grad(X) + V, axis=1)


@dataclass(frozen=True, eq=False, kw_only=True)
class CompositePotential(Potential):
    """``(f(x) + |x - center|^2 / (2 eta)) / eps`` for a base potential f."""

    base: Potential
    center: Array
    eta: float
    eps: float


def composite(f: Potential, y, eta: float, eps: float = 1.0) -> CompositePotential:
    """Regularized potential targeted by the restricted Gaussian oracle."""
    if not eta > 0:
        raise ValidationError("eta must be positive")
    if not eps > 0:
        raise ValidationError("eps must be positive")
    y = np.asarray(y, dtype=float).reshape(-1)
    if y.shape[0] != f.dim:
        raise ValidationError(f"center has dimension {y.shape[0]}, potential has {f.dim}")

    def fun(X):
        return (f.fun(X) + np.sum((X - y) ** 2, axis=1) / (2 * eta)) / eps

    grad = None
    if f.grad is not None:
        def grad(X):
            return (f.grad(X) + (X - y) / eta) / eps

    reg = f.regularity
    alpha = None
    low = reg.lower_curvature
    if low is not None and low + 1 / eta > 0:
        alpha = (low + 1 / eta) / eps
    beta = None
    if reg.beta_smoothness is not None:
        beta = (reg.beta_smoothness + 1 / eta) / eps
    creg = RegularityInfo(
        alpha_strong_convexity=alpha,
        beta_smoothness=beta,
        inequality="SLC" if alpha is not None else "none",
        inequality_constant=alpha,
        smoothness_radius=reg.smoothness_radius,
    )
    return CompositePotential(
        dim=f.dim, fun=fun, grad=grad, regularity=creg,
        name=f"composite({f.name})", params=f.params,
        base=f, center=y, eta=float(eta), eps=float(eps),
    )


def with_regularity(f: Potential, **changes) -> Potential:
    """Copy of ``f`` with some regularity fields replaced."""
    return dataclasses.replace(f, regularity=dataclasses.replace(f.regularity, **changes))


# -- built-in catalogue ------------------------------------------------------

def _quadratic(params: Sequence[float]) -> Potential:
    if len(params) == 0:
        raise ValidationError("quadratic needs at least one precision eigenvalue")
    lam = np.asarray(params, dtype=float)
    if np.any(~(lam > 0)):
        raise ValidationError("quadratic precision eigenvalues must be positive")
    lo, hi = float(lam.min()), float(lam.max())
    return Potential(
        dim=lam.size,
        fun=lambda X: 0.5 * np.sum(lam * X * X, axis=1),
        grad=lambda X: lam * X,
        analytic_prox=lambda eta, Y: Y / (1.0 + eta * lam),
        regularity=RegularityInfo(alpha_strong_convexity=lo, beta_smoothness=hi,
                                  inequality="SLC", inequality_constant=lo),
        name="quadratic", params=tuple(lam.tolist()),
        fmin=0.0, argmin=np.zeros(lam.size),
    )


def _abs_subdiff_dist(X, V):
    x, v = X[:, 0], V[:, 0]
    away = np.abs(np.sign(x) + v)
    at_zero = np.maximum(np.abs(v) - 1.0, 0.0)
    return np.where(x != 0, away, at_zero)


def soft_threshold(y, t):
    y = np.asarray(y, dtype=float)
    return np.sign(y) * np.maximum(np.abs(y) - t, 0.0)


def _abs_1d(params: Sequence[float]) -> Potential:
    if params:
        raise ValidationError("abs_1d takes no parameters")
    return Potential(
        dim=1,
        fun=lambda X: np.abs(X[:, 0]),
        # minimal-norm subgradient: 0 at the kink
        grad=lambda X: np.sign(X),
        analytic_prox=lambda eta, Y: soft_threshold(Y, eta),
        subdiff_dist=_abs_subdiff_dist,
        regularity=RegularityInfo(alpha_strong_convexity=0.0, lipschitz_M=1.0, inequality="LC"),
        name="abs_1d", fmin=0.0, argmin=np.zeros(1),
    )


def _quartic_1d(params: Sequence[float]) -> Potential:
    if params:
        raise ValidationError("quartic_1d takes no parameters")
    return Potential(
        dim=1,
        fun=lambda X: 0.25 * X[:, 0] ** 4,
        grad=lambda X: X ** 3,
        regularity=RegularityInfo(alpha_strong_convexity=0.0, inequality="LC"),
        name="quartic_1d", fmin=0.0, argmin=np.zeros(1),
    )


def _pl_sine_1d(params: Sequence[float]) -> Potential:
    if params:
        raise ValidationError("pl_sine_1d takes no parameters")
    # f'' = 2 + 6 cos(2x) ranges over [-4, 8]
    return Potential(
        dim=1,
        fun=lambda X: X[:, 0] ** 2 + 3.0 * np.sin(X[:, 0]) ** 2,
        grad=lambda X: 2.0 * X + 3.0 * np.sin(2.0 * X),
        regularity=RegularityInfo(beta_smoothness=8.0, curvature_lower=-4.0),
        name="pl_sine_1d", fmin=0.0, argmin=np.zeros(1),
    )


def _quartic_plus_quadratic_d(params: Sequence[float]) -> Potential:
    if not 1 <= len(params) <= 4:
        raise ValidationError("quartic_plus_quadratic_d takes [d, a=1, b=1, R=2]")
    d = params[0]
    a, b, R = (list(params[1:]) + [1.0, 1.0, 2.0][len(params) - 1:])[:3]
    if int(d) != d or d < 1:
        raise ValidationError("dimension d must be a positive integer")
    if not (a > 0 and b >= 0 and R > 0):
        raise ValidationError("need a > 0, b >= 0, R > 0")
    d = int(d)
    return Potential(
        dim=d,
        fun=lambda X: 0.5 * a * np.sum(X * X, axis=1) + 0.25 * b * np.sum(X ** 4, axis=1),
        grad=lambda X: a * X + b * X ** 3,
        regularity=RegularityInfo(
            alpha_strong_convexity=float(a),
            beta_smoothness=float(a + 3.0 * b * R * R),
            smoothness_radius=float(R),
            inequality="SLC", inequality_constant=float(a),
        ),
        name="quartic_plus_quadratic_d", params=(d, float(a), float(b), float(R)),
        fmin=0.0, argmin=np.zeros(d),
    )


BUILTINS: dict[str, Callable[[Sequence[float]], Potential]] = {
    "quadratic": _quadratic,
    "abs_1d": _abs_1d,
    "quartic_1d": _quartic_1d,
    "pl_sine_1d": _pl_sine_1d,
    "quartic_plus_quadratic_d": _quartic_plus_quadratic_d,
}


def builtin(name: str, params: Sequence[float] = ()) -> Potential:
    """Instantiate a catalogue potential by name.

    ``quadratic`` takes the precision spectrum, ``quartic_plus_quadratic_d``
    takes ``[d, a, b, R]`` for ``a/2 |x|^2 + b/4 sum x_i^4`` with smoothness
    ``a + 3 b R^2`` declared on the box of radius R.  The others take no
    parameters.
    """
    try:
        factory = BUILTINS[name]
    except KeyError:
        raise ConfigError(f"unknown potential {name!r}; choose from {sorted(BUILTINS)}") from None
    return factory(list(params))


# -- numerical certificates --------------------------------------------------

def grad_check(f: Potential, points, h: float = 1e-5) -> float:
    """Max over points of |grad f - central differences| / (1 + |grad f|)."""
    X, _ = f._batch(points)
    with np.errstate(invalid="ignore", over="ignore"):
        G = f.gradient(X)
        fd = np.empty_like(X)
        for j in range(f.dim):
            e = np.zeros(f.dim)
            e[j] = h
            fd[:, j] = (f.fun(X + e) - f.fun(X - e)) / (2 * h)
        err = np.linalg.norm(G - fd, axis=1) / (1.0 + np.linalg.norm(G, axis=1))
    if not np.all(np.isfinite(err)):
        return float("inf")
    return float(err.max())


def certify_pl_constant(f: Potential, lo: float = -10.0, hi: float = 10.0,
                        n: int = 100_000, exclude: float = 1e-3) -> float:
    """Grid infimum of |f'|^2 / (2 (f - f*)) on ``[lo, hi]`` for a 1-D potential.

    Points within ``exclude`` of the known minimizer are skipped, since the
    ratio is 0/0 there.
    """
    if f.dim != 1 or f.fmin is None or f.argmin is None or f.grad is None:
        raise ValidationError("PL certification needs a 1-D potential with gradient and known minimum")
    x = np.linspace(lo, hi, n)
    x = x[np.abs(x - f.argmin[0]) > exclude][:, None]
    gap = f.fun(x) - f.fmin
    g2 = np.sum(f.grad(x) ** 2, axis=1)
    return float(np.min(g2 / (2.0 * gap)))
