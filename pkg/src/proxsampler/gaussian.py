"""Closed-form proximal sampler dynamics for Gaussian targets.

For the target N(0, S) (potential ``x.S^{-1}x / 2``) and a Gaussian iterate
N(m, C), one sampler iteration with step ``eta`` gives

    m'  = S (S + eta I)^{-1} m
    C'  = S (S + eta I)^{-1} (C + eta I) (S + eta I)^{-1} S + eta S (S + eta I)^{-1}

The entropy-regularized variant with level ``eps`` targets ``exp(-f/eps)``;
it coincides with the plain recursion for target covariance ``eps S`` and
step ``eps eta``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

EIG_FLOOR = 1e-14


def _as_matrix(a, name: str = "matrix") -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    elif a.ndim == 1:
        a = np.diag(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValidationError(f"{name} must be square")
    return a


def _check_spd(a: np.ndarray, name: str) -> None:
    if not np.all(np.isfinite(a)):
        raise ValidationError(f"{name} has non-finite entries")
    if np.max(np.abs(a - a.T), initial=0.0) > 1e-12:
        raise ValidationError(f"{name} is not symmetric")
    if np.linalg.eigvalsh(a).min() <= 0:
        raise ValidationError(f"{name} is not positive definite")


@dataclass(frozen=True, eq=False)
class GaussianState:
    """N(mean, cov).  A 1-D cov may be given as a variance or a vector of
    variances (interpreted as a diagonal)."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        m = np.atleast_1d(np.asarray(self.mean, dtype=float))
        c = _as_matrix(self.cov, "covariance")
        if c.shape[0] != m.size:
            raise ValidationError("mean and covariance dimensions differ")
        _check_spd(c, "covariance")
        object.__setattr__(self, "mean", m)
        object.__setattr__(self, "cov", c)

    @property
    def dim(self) -> int:
        return self.mean.size

    @classmethod
    def standard(cls, d: int) -> "GaussianState":
        return cls(np.zeros(d), np.eye(d))


def _sqrtm(a: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(0.5 * (a + a.T))
    return (v * np.sqrt(np.maximum(w, EIG_FLOOR))) @ v.T


def gaussian_forward(s: GaussianState, eta: float, eps: float = 1.0) -> GaussianState:
    """Law of ``y = x + sqrt(eps eta) xi``."""
    if not eta > 0 or eps < 0:
        raise ValidationError("need eta > 0 and eps >= 0")
    return GaussianState(s.mean.copy(), s.cov + eps * eta * np.eye(s.dim))


def gaussian_step(s: GaussianState, sigma_target, eta: float, eps: float = 1.0) -> GaussianState:
    """One forward+backward iteration for the target N(0, sigma_target)."""
    if not eta > 0 or not eps > 0:
        raise ValidationError("need eta > 0 and eps > 0")
    S = eps * _as_matrix(sigma_target, "sigma_target")
    if S.shape[0] != s.dim:
        raise ValidationError("target and state dimensions differ")
    _check_spd(S, "sigma_target")
    h = eps * eta
    eye = np.eye(s.dim)
    # A = S (S + hI)^{-1}; S and (S + hI)^{-1} commute
    A = np.linalg.solve(S + h * eye, S).T
    m = A @ s.mean
    C = A @ (s.cov + h * eye) @ A.T + h * A
    return GaussianState(m, 0.5 * (C + C.T))


def gaussian_trajectory(s0: GaussianState, sigma_target, eta: float, k: int,
                        eps: float = 1.0) -> list[GaussianState]:
    out = [s0]
    for _ in range(k):
        out.append(gaussian_step(out[-1], sigma_target, eta, eps))
    return out


def gaussian_mean_is_prox_check(s: GaussianState, sigma_target, eta: float,
                                atol: float = 1e-10) -> bool:
    """Whether the next mean equals ``prox_{eta f}(m)`` for ``f = x.S^{-1}x/2``."""
    S = _as_matrix(sigma_target, "sigma_target")
    prox = np.linalg.solve(np.eye(s.dim) + eta * np.linalg.inv(S), s.mean)
    return bool(np.max(np.abs(gaussian_step(s, S, eta).mean - prox)) <= atol)


# -- divergences ----------------------------------------------------------

def _same_dim(a: GaussianState, b: GaussianState) -> None:
    if a.dim != b.dim:
        raise ValidationError("states have different dimensions")


def kl_gauss(a: GaussianState, b: GaussianState) -> float:
    """KL(a || b)."""
    _same_dim(a, b)
    d = a.dim
    dm = b.mean - a.mean
    _, ld_a = np.linalg.slogdet(a.cov)
    _, ld_b = np.linalg.slogdet(b.cov)
    tr = np.trace(np.linalg.solve(b.cov, a.cov))
    quad = dm @ np.linalg.solve(b.cov, dm)
    return max(0.5 * (tr + quad - d + ld_b - ld_a), 0.0)


def w2_gauss(a: GaussianState, b: GaussianState) -> float:
    """2-Wasserstein distance (Bures form)."""
    _same_dim(a, b)
    rb = _sqrtm(b.cov)
    cross = _sqrtm(rb @ a.cov @ rb)
    sq = np.sum((a.mean - b.mean) ** 2) + np.trace(a.cov + b.cov - 2.0 * cross)
    return float(np.sqrt(max(sq, 0.0)))


def _log_power_integral(q: float, a: GaussianState, b: GaussianState) -> float:
    """log of int a^q b^(1-q), or +inf when the integrand is not integrable."""
    A = np.linalg.inv(a.cov)
    B = np.linalg.inv(b.cov)
    P = q * A + (1.0 - q) * B
    P = 0.5 * (P + P.T)
    if np.linalg.eigvalsh(P).min() <= 0:
        return float("inf")
    h = q * A @ a.mean + (1.0 - q) * B @ b.mean
    const = -0.5 * q * a.mean @ A @ a.mean - 0.5 * (1.0 - q) * b.mean @ B @ b.mean
    _, ld_a = np.linalg.slogdet(a.cov)
    _, ld_b = np.linalg.slogdet(b.cov)
    _, ld_p = np.linalg.slogdet(P)
    return float(-0.5 * q * ld_a - 0.5 * (1.0 - q) * ld_b - 0.5 * ld_p
                 + 0.5 * h @ np.linalg.solve(P, h) + const)


def chi2_gauss(a: GaussianState, b: GaussianState) -> float:
    """chi^2(a || b); ``inf`` when ``2 b.cov^{-1} - a.cov^{-1}`` is not PD."""
    _same_dim(a, b)
    return max(float(np.expm1(_log_power_integral(2.0, a, b))), 0.0)


def renyi_gauss(q: float, a: GaussianState, b: GaussianState) -> float:
    """Renyi divergence of order ``q >= 1`` of a from b; q = 1 is KL."""
    _same_dim(a, b)
    if q < 1:
        raise ValidationError("Renyi order must be >= 1")
    if q == 1:
        return kl_gauss(a, b)
    return max(_log_power_integral(q, a, b) / (q - 1.0), 0.0)
