"""Convergence-rate bounds for the proximal sampler and the proximal point method.

Each ``bound_*`` function evaluates a bound at iteration ``k`` from the
initial divergence and the regularity constants.  :class:`RateBound` bundles
a theorem identifier with its parameters for use in experiment reports.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import UndefinedBoundError, ValidationError

LOI_CONSTANT = 68.0
# constant appearing in the proof of the LOI rate
LOI_CONSTANT_PROOF = 136.0


def _check_k(k) -> int:
    if int(k) != k or k < 0:
        raise ValidationError(f"iteration k must be a nonnegative integer, got {k!r}")
    return int(k)


def _log_factor(alpha: float, eta: float) -> float:
    if alpha < 0 or not eta > 0:
        raise ValidationError("need alpha >= 0 and eta > 0")
    return math.log1p(alpha * eta)


def bound_slc(W2_0: float, alpha: float, eta: float, k: int) -> float:
    """W2 contraction ``W2_0 / (1 + alpha eta)^k`` under strong log-concavity."""
    k = _check_k(k)
    if W2_0 < 0:
        raise ValidationError("W2_0 must be nonnegative")
    return W2_0 * math.exp(-k * _log_factor(alpha, eta))


def bound_lc(W2_0: float, H_0: float | None, eta: float, k: int) -> float:
    """KL bound for log-concave targets.

    Without ``H_0``: ``W2_0^2 / (k eta)``.  With ``H_0`` the sharper
    ``H_0 / (1 + k eta H_0 / W2_0^2)``, which also covers ``k = 0``.
    """
    k = _check_k(k)
    if not eta > 0:
        raise ValidationError("eta must be positive")
    w2sq = W2_0 * W2_0
    if H_0 is None:
        if k == 0:
            raise UndefinedBoundError("the log-concave bound needs k >= 1 unless H_0 is given")
        return w2sq / (k * eta)
    if H_0 < 0:
        raise ValidationError("H_0 must be nonnegative")
    if w2sq == 0:
        return 0.0 if k > 0 else H_0
    return H_0 / (1.0 + k * eta * H_0 / w2sq)


def bound_lsi(kind: str, D_0: float, alpha: float, eta: float, q: float, k: int) -> float:
    """KL (``q`` ignored) or Renyi-q bound under alpha-LSI."""
    k = _check_k(k)
    kind = kind.upper()
    if D_0 < 0:
        raise ValidationError("D_0 must be nonnegative")
    L = _log_factor(alpha, eta)
    if kind == "KL":
        return D_0 * math.exp(-2 * k * L)
    if kind == "RENYI":
        if q < 1:
            raise ValidationError("Renyi order q must be >= 1")
        return D_0 * math.exp(-2 * k * L / q)
    raise ValidationError(f"unknown LSI bound kind {kind!r}")


def pi_renyi_threshold(R_0: float, alpha: float, eta: float, q: float) -> float:
    """Iteration count after which the Poincare Renyi bound turns exponential."""
    return q * (R_0 - 1.0) / (2.0 * _log_factor(alpha, eta))


def bound_pi(kind: str, D_0: float, alpha: float, eta: float, q: float, k: int) -> float:
    """chi^2 or piecewise Renyi-q (q >= 2) bound under alpha-PI."""
    k = _check_k(k)
    kind = kind.upper()
    L = _log_factor(alpha, eta)
    if L == 0:
        raise ValidationError("the Poincare bound needs alpha * eta > 0")
    if kind == "CHI2":
        return D_0 * math.exp(-2 * k * L)
    if kind != "RENYI":
        raise ValidationError(f"unknown PI bound kind {kind!r}")
    if q < 2:
        raise ValidationError("the Poincare Renyi bound requires q >= 2")
    T = pi_renyi_threshold(D_0, alpha, eta, q)
    if k <= T:
        return D_0 - 2 * k * L / q
    k0 = math.ceil(T)
    return math.exp(-2 * (k - k0) * L / q)


def loi_threshold(R_0: float, alpha: float, eta: float, q: float, r: float,
                  loi_constant: float = LOI_CONSTANT) -> float:
    s = 2.0 / r - 1.0
    return loi_constant * q / (s * _log_factor(alpha, eta)) * (R_0 ** s - 1.0)


def bound_loi(R_0: float, alpha: float, eta: float, q: float, r: float, k: int,
              loi_constant: float = LOI_CONSTANT) -> float:
    """Piecewise Renyi-q bound under (r, alpha)-LOI with ``1 <= r < 2``."""
    k = _check_k(k)
    if r == 2:
        raise ValidationError("r = 2 is the log-Sobolev case; use bound_lsi")
    if not 1 <= r < 2:
        raise ValidationError("LOI order r must lie in [1, 2)")
    if q < 2:
        raise ValidationError("the LOI bound requires q >= 2")
    if R_0 < 0 or not loi_constant > 0:
        raise ValidationError("need R_0 >= 0 and a positive LOI constant")
    L = _log_factor(alpha, eta)
    if L == 0:
        raise ValidationError("the LOI bound needs alpha * eta > 0")
    s = 2.0 / r - 1.0
    c0 = loi_threshold(R_0, alpha, eta, q, r, loi_constant)
    if k <= c0:
        base = R_0 ** s - s * k * L / (loi_constant * q)
        return max(base, 0.0) ** (r / (2.0 - r))
    return math.exp(-(k - math.ceil(c0)) * L / (loi_constant * q))


def bound_eps_generalized(H_0: float, alpha: float, eta: float, k: int) -> float:
    """KL bound for the entropy-regularized sampler; independent of eps."""
    k = _check_k(k)
    if H_0 < 0:
        raise ValidationError("H_0 must be nonnegative")
    return H_0 * math.exp(-2 * k * _log_factor(alpha, eta))


def bound_prox_pl(gap_0: float, alpha: float, eta: float, k: int) -> float:
    """``f(x_k) - f*`` bound for the proximal point method under alpha-PL."""
    k = _check_k(k)
    if gap_0 < 0:
        raise ValidationError("gap_0 must be nonnegative")
    return gap_0 * math.exp(-2 * k * _log_factor(alpha, eta))


def suggest_step_size(regime: str, constant: float, d: int, prefactor: float = 0.5) -> float:
    """Step size making the RGO cheap for rejection sampling.

    ``smooth_beta``: ``prefactor / (beta d)`` (a prefactor below 1 keeps
    ``beta eta < 1``).  ``lipschitz_M``: ``1 / (16 M^2 d)``.
    """
    if not constant > 0:
        raise ValidationError("constant must be positive")
    if int(d) != d or d < 1:
        raise ValidationError("dimension must be a positive integer")
    if regime == "smooth_beta":
        if not 0 < prefactor:
            raise ValidationError("prefactor must be positive")
        return prefactor / (constant * d)
    if regime == "lipschitz_M":
        return 1.0 / (16.0 * constant * constant * d)
    raise ValidationError(f"unknown step-size regime {regime!r}")


def rejection_trials_bound(beta: float, eta: float, d: int) -> float:
    """``kappa^(d/2)`` with ``kappa = (1 + beta eta) / (1 - beta eta)``."""
    if not 0 < beta * eta < 1:
        raise ValidationError("need 0 < beta * eta < 1")
    return ((1 + beta * eta) / (1 - beta * eta)) ** (d / 2)


# -- bundled bounds ---------------------------------------------------------

THEOREMS = ("SLC", "LC", "LSI_KL", "LSI_RENYI", "PI_CHI2", "PI_RENYI", "LOI",
            "EPS_GENERALIZED", "PROX_PL")

# divergence each bound controls
THEOREM_METRIC = {
    "SLC": "W2", "LC": "KL", "LSI_KL": "KL", "LSI_RENYI": "RENYI", "PI_CHI2": "CHI2",
    "PI_RENYI": "RENYI", "LOI": "RENYI", "EPS_GENERALIZED": "KL", "PROX_PL": "F_GAP",
}

REQUIRED = {
    "SLC": ("W2_0", "alpha", "eta"),
    "LC": ("W2_0", "eta"),
    "LSI_KL": ("D_0", "alpha", "eta"),
    "LSI_RENYI": ("D_0", "alpha", "eta", "q"),
    "PI_CHI2": ("D_0", "alpha", "eta"),
    "PI_RENYI": ("D_0", "alpha", "eta", "q"),
    "LOI": ("D_0", "alpha", "eta", "q", "r"),
    "EPS_GENERALIZED": ("D_0", "alpha", "eta"),
    "PROX_PL": ("D_0", "alpha", "eta"),
}


@dataclass(frozen=True)
class RateBound:
    theorem: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.theorem not in THEOREMS:
            raise ValidationError(f"unknown theorem {self.theorem!r}; choose from {THEOREMS}")
        missing = [p for p in REQUIRED[self.theorem] if p not in self.params]
        if missing:
            raise ValidationError(f"{self.theorem} needs parameters {missing}")
        if self.theorem in ("PI_RENYI", "LOI") and self.params["q"] < 2:
            raise ValidationError(f"{self.theorem} requires q >= 2")

    @property
    def metric(self) -> str:
        return THEOREM_METRIC[self.theorem]

    def __call__(self, k: int) -> float:
        p, t = self.params, self.theorem
        if t == "SLC":
            return bound_slc(p["W2_0"], p["alpha"], p["eta"], k)
        if t == "LC":
            return bound_lc(p["W2_0"], p.get("H_0"), p["eta"], k)
        if t == "LSI_KL":
            return bound_lsi("KL", p["D_0"], p["alpha"], p["eta"], 1.0, k)
        if t == "LSI_RENYI":
            return bound_lsi("RENYI", p["D_0"], p["alpha"], p["eta"], p["q"], k)
        if t == "PI_CHI2":
            return bound_pi("CHI2", p["D_0"], p["alpha"], p["eta"], 2.0, k)
        if t == "PI_RENYI":
            return bound_pi("RENYI", p["D_0"], p["alpha"], p["eta"], p["q"], k)
        if t == "LOI":
            return bound_loi(p["D_0"], p["alpha"], p["eta"], p["q"], p["r"], k,
                             p.get("loi_constant", LOI_CONSTANT))
        if t == "EPS_GENERALIZED":
            return bound_eps_generalized(p["D_0"], p["alpha"], p["eta"], k)
        return bound_prox_pl(p["D_0"], p["alpha"], p["eta"], k)

    evaluate = __call__

    def curve(self, k_max: int, k_min: int = 0) -> list[tuple[int, float]]:
        return [(k, self(k)) for k in range(k_min, k_max + 1)]
