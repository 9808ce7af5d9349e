"""Deterministic 1-D density evolution on a uniform grid.

Densities are propagated through the exact forward (heat) and backward
(RGO) steps of the proximal sampler using trapezoid quadrature, so that the
convergence theorems can be checked without Monte Carlo noise.  Both steps
are discrete convolutions with a Gaussian kernel on the grid, evaluated by
direct summation (``numpy.convolve``), which fixes the summation order.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh_tridiagonal
from scipy.special import log_ndtr

from .errors import (DomainTooSmallError, NumericError, NumericRangeError,
                     SupportError, ValidationError)
from .potential import Potential

FLOOR = 1e-300
ENDPOINT_RATIO = 1e-14
LEAK_TOL = 1e-10


def trapezoid_weights(n: int, h: float) -> np.ndarray:
    w = np.full(n, h)
    w[0] = w[-1] = 0.5 * h
    return w


@dataclass(frozen=True, eq=False)
class GridDensity:
    lo: float
    hi: float
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if not self.lo < self.hi:
            raise ValidationError("need lo < hi")
        if v.ndim != 1 or v.size < 3:
            raise ValidationError("values must be a 1-D array with at least 3 nodes")
        if not np.all(np.isfinite(v)) or np.any(v < 0):
            raise ValidationError("density values must be finite and nonnegative")
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return self.values.size

    @property
    def h(self) -> float:
        return (self.hi - self.lo) / (self.n - 1)

    @property
    def x(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.n)

    @property
    def weights(self) -> np.ndarray:
        return trapezoid_weights(self.n, self.h)

    def mass(self) -> float:
        return float(self.weights @ self.values)

    def mean(self) -> float:
        return float(self.weights @ (self.x * self.values))

    def variance(self) -> float:
        m = self.mean()
        return float(self.weights @ ((self.x - m) ** 2 * self.values))

    def normalized(self) -> "GridDensity":
        m = self.mass()
        if not m > 0:
            raise NumericRangeError("density has zero mass on the grid")
        return GridDensity(self.lo, self.hi, self.values / m)

    def same_grid(self, other: "GridDensity") -> bool:
        return self.n == other.n and self.lo == other.lo and self.hi == other.hi

    @classmethod
    def from_values(cls, lo: float, hi: float, values) -> "GridDensity":
        return cls(lo, hi, values).normalized()

    @classmethod
    def gaussian(cls, mean: float, var: float, lo: float, hi: float, n: int) -> "GridDensity":
        x = np.linspace(lo, hi, n)
        return cls.from_values(lo, hi, np.exp(-0.5 * (x - mean) ** 2 / var))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["x", "value"])
            for xi, vi in zip(self.x, self.values):
                w.writerow([f"{xi:.17g}", f"{vi:.17g}"])


def _check_shared(rho: GridDensity, pi: GridDensity) -> None:
    if not rho.same_grid(pi):
        raise ValidationError("densities live on different grids")


def _potential_on(f: Potential, x: np.ndarray) -> np.ndarray:
    return np.asarray(f.fun(x[:, None]), dtype=float)


def grid_from_potential(f: Potential, lo: float, hi: float, n: int) -> GridDensity:
    """Normalized ``exp(-f)`` on ``n`` nodes of ``[lo, hi]``."""
    if f.dim != 1:
        raise ValidationError("grid densities need a 1-D potential")
    x = np.linspace(lo, hi, n)
    fx = _potential_on(f, x)
    if not np.all(np.isfinite(fx)):
        raise NumericRangeError("potential is not finite on the grid")
    fmin = fx.min()
    v = np.exp(-(fx - fmin))
    if max(v[0], v[-1]) > ENDPOINT_RATIO:
        raise DomainTooSmallError(
            f"exp(-f) at the endpoints is {max(v[0], v[-1]):.2e} of its maximum; widen [lo, hi]")
    # mass beyond the grid, estimated on extensions of equal length
    width = hi - lo
    h = width / (n - 1)
    tail = 0.0
    for a in (lo - width, hi):
        xt = np.linspace(a, a + width, n)
        ft = _potential_on(f, xt)
        tail += float(trapezoid_weights(n, h) @ np.exp(-(ft - fmin)))
    inside = float(trapezoid_weights(n, h) @ v)
    if tail > LEAK_TOL * inside:
        raise DomainTooSmallError(f"relative mass {tail / inside:.2e} outside the grid")
    return GridDensity(lo, hi, v / inside)


def _gauss_kernel(n: int, h: float, var: float) -> np.ndarray:
    """Unnormalized Gaussian kernel at offsets -(n-1)h .. (n-1)h."""
    off = h * np.arange(-(n - 1), n)
    return np.exp(-0.5 * off * off / var)


def _conv(kernel: np.ndarray, v: np.ndarray) -> np.ndarray:
    # out[i] = sum_j kernel[i - j + n - 1] v[j]
    n = v.size
    return np.convolve(kernel, v, mode="full")[n - 1:2 * n - 1]


def _finish(lo: float, hi: float, out: np.ndarray, normalize: bool) -> GridDensity:
    return GridDensity.from_values(lo, hi, out) if normalize else GridDensity(lo, hi, out)


def heat_convolve(rho: GridDensity, t: float, normalize: bool = True) -> GridDensity:
    """Convolve with N(0, t) by trapezoid quadrature.

    The result is renormalized unless ``normalize=False``, which exposes the
    raw quadrature mass.
    """
    if t < 0:
        raise ValidationError("t must be nonnegative")
    if t == 0:
        return GridDensity(rho.lo, rho.hi, rho.values.copy())
    x, w = rho.x, rho.weights
    s = np.sqrt(t)
    # kernel mass falling outside [lo, hi], per source node
    log_out = np.logaddexp(log_ndtr((rho.lo - x) / s), log_ndtr((x - rho.hi) / s))
    leak = float(w @ (rho.values * np.exp(log_out)))
    if leak > LEAK_TOL:
        raise DomainTooSmallError(f"heat kernel leaks mass {leak:.2e} past the grid")
    k = _gauss_kernel(rho.n, rho.h, t) / np.sqrt(2 * np.pi * t)
    out = np.maximum(_conv(k, w * rho.values), 0.0)
    return _finish(rho.lo, rho.hi, out, normalize)


def rgo_density_step(rhoY: GridDensity, f: Potential, eta: float, eps: float = 1.0,
                     normalize: bool = True) -> GridDensity:
    """Mix the RGO conditionals ``pi_eps(x | y)`` against ``rhoY``.

    out(x_i) = sum_j w_j rhoY(y_j) exp(-g(x_i) - (x_i - y_j)^2 / (2 eta eps)) / Z(y_j)
    with ``g = f / eps`` and ``Z`` the trapezoid normalizer of each conditional.
    """
    if not eta > 0 or not eps > 0:
        raise ValidationError("need eta > 0 and eps > 0")
    x, w = rhoY.x, rhoY.weights
    g = _potential_on(f, x) / eps
    if not np.all(np.isfinite(g)):
        raise NumericRangeError("potential is not finite on the grid")
    e = np.exp(-(g - g.min()))
    k = _gauss_kernel(rhoY.n, rhoY.h, eta * eps)
    Z = _conv(k, w * e)
    bad = ~(Z > 0) | ~np.isfinite(Z)
    if bad.any():
        j = int(np.flatnonzero(bad)[0])
        raise NumericRangeError(f"conditional normalizer underflows at node {j} (y = {x[j]:.6g})")
    c = w * rhoY.values / Z
    out = np.maximum(e * _conv(k, c), 0.0)
    return _finish(rhoY.lo, rhoY.hi, out, normalize)


def sampler_density_step(rho: GridDensity, f: Potential, eta: float, eps: float = 1.0) -> GridDensity:
    """One full proximal sampler iteration on the grid."""
    return rgo_density_step(heat_convolve(rho, eps * eta), f, eta, eps)


def density_trajectory(rho0: GridDensity, f: Potential, eta: float, k: int,
                       eps: float = 1.0) -> list[GridDensity]:
    out = [rho0]
    for _ in range(k):
        out.append(sampler_density_step(out[-1], f, eta, eps))
    return out


# -- divergences ----------------------------------------------------------

def _parse_kind(kind) -> tuple[str, float | None]:
    if isinstance(kind, tuple):
        name, q = kind
        return str(name).upper(), float(q)
    s = str(kind).upper()
    if s.startswith("RENYI"):
        inner = s[5:].strip("()[]:= ")
        if not inner:
            raise ValidationError("RENYI needs an order, e.g. RENYI(2)")
        return "RENYI", float(inner)
    return s, None


def divergence_grid(kind, rho: GridDensity, pi: GridDensity) -> float:
    """KL, CHI2 or RENYI(q) of ``rho`` from ``pi`` by trapezoid quadrature.

    ``kind`` is ``"KL"``, ``"CHI2"``, ``"RENYI(q)"`` or ``("RENYI", q)``.
    """
    _check_shared(rho, pi)
    name, q = _parse_kind(kind)
    w, r, p = rho.weights, rho.values, pi.values
    live = r > FLOOR
    if np.any(live & ~(p > 0)):
        i = int(np.flatnonzero(live & ~(p > 0))[0])
        raise SupportError(f"rho has mass at x = {rho.x[i]:.6g} where pi vanishes")
    rl, pl, wl = r[live], p[live], w[live]
    if name == "RENYI" and q == 1.0:
        name = "KL"
    if name == "KL":
        return max(float(wl @ (rl * (np.log(rl) - np.log(pl)))), 0.0)
    if name == "CHI2":
        return max(float(wl @ (rl * rl / pl)) - 1.0, 0.0)
    if name == "RENYI":
        if q < 1:
            raise ValidationError("Renyi order must be >= 1")
        # log-domain sum of w rho^q pi^(1-q)
        lt = np.log(wl) + q * np.log(rl) + (1.0 - q) * np.log(pl)
        top = lt.max()
        val = (top + np.log(np.sum(np.exp(lt - top)))) / (q - 1.0)
        return max(float(val), 0.0)
    raise ValidationError(f"unknown divergence {kind!r}")


def quantiles(rho: GridDensity, u: np.ndarray) -> np.ndarray:
    w = rho.values
    cdf = np.concatenate([[0.0], np.cumsum(0.5 * rho.h * (w[1:] + w[:-1]))])
    cdf /= cdf[-1]
    # flat stretches of the CDF make inversion ambiguous; keep the first node of each
    keep = np.concatenate([[True], np.diff(cdf) > 0])
    return np.interp(u, cdf[keep], rho.x[keep])


def w2_grid_1d(rho: GridDensity, pi: GridDensity, nodes: int = 10_000) -> float:
    """W2 via the quantile coupling on ``nodes`` midpoint quantile levels."""
    _check_shared(rho, pi)
    u = (np.arange(nodes) + 0.5) / nodes
    d = quantiles(rho, u) - quantiles(pi, u)
    return float(np.sqrt(np.mean(d * d)))


def poincare_estimate(pi: GridDensity) -> float:
    """Spectral gap of the weighted Neumann problem ``-(pi psi')' = lam pi psi``.

    Piecewise-linear elements with lumped mass; ``pi`` at edge midpoints is
    the geometric mean of its endpoint values.
    """
    p = pi.values
    if np.any(~(p[1:-1] > 0)):
        raise ValidationError("pi must be strictly positive on the grid interior")
    p = np.maximum(p, FLOOR)
    h = pi.h
    mass = pi.weights * p
    edge = np.sqrt(p[1:] * p[:-1]) / h
    diag = np.zeros(pi.n)
    diag[:-1] += edge
    diag[1:] += edge
    s = 1.0 / np.sqrt(mass)
    d = diag * s * s
    e = -edge * s[1:] * s[:-1]
    try:
        lam = eigh_tridiagonal(d, e, eigvals_only=True, select="i", select_range=(0, 1))
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NumericError(f"eigen-solver failed: {exc}") from exc
    return float(lam[1])
