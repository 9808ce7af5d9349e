"""Run a configured experiment and report measured divergences against bounds.

Each experiment produces one series of measured values per metric over
``k = 0..K``.  Every bound listed in the configuration is evaluated through
:class:`proxsampler.rates.RateBound` with parameters taken from the same run:
the initial divergence is the measured value at ``k = 0``, ``eta`` is the
sampler step and ``alpha`` comes from ``bound.alpha``.
"""
from __future__ import annotations

import csv
import dataclasses
import logging
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import ExperimentConfig, parse_metric
from .density1d import (GridDensity, density_trajectory, divergence_grid,
                        grid_from_potential, poincare_estimate, quantiles,
                        w2_grid_1d)
from .errors import ConfigError, UndefinedBoundError
from .gaussian import (GaussianState, chi2_gauss, gaussian_trajectory, kl_gauss,
                       renyi_gauss, w2_gauss)
from .potential import Potential, certify_pl_constant
from .proxopt import prox_point_run
from .rates import THEOREM_METRIC, RateBound, bound_eps_generalized
from .sampler import ChainEnsemble, run, write_trajectory_csv

log = logging.getLogger(__name__)

OUTPUT_DIR_ENV = "PROXSAMPLER_OUTPUT_DIR"
REPORT_HEADER = ("k", "metric", "measured", "bound_name", "bound", "satisfied")

# a measured value counts as satisfying its bound up to round-off
SATISFY_RTOL = 1e-9
SATISFY_ATOL = 1e-12

# entropy for the stream that draws Gaussian initial ensembles; chain
# streams are spawned from the bare seed, so the two never coincide
_INIT_STREAM_TAG = 0x1A17


@dataclass(frozen=True)
class ReportRow:
    k: int
    metric: str
    measured: float
    bound_name: str = ""
    bound: float | None = None
    satisfied: bool | None = None


@dataclass
class _Series:
    label: str
    kind: str
    q: float | None
    values: list[float]


def is_satisfied(measured: float, bound: float) -> bool:
    return bool(measured <= bound + SATISFY_ATOL + SATISFY_RTOL * abs(bound))


def fitted_contraction(values) -> float:
    """Per-step factor ``exp(slope)`` of a least-squares line through ``log(values)``."""
    v = np.asarray(values, dtype=float)
    if v.size < 2 or np.any(~(v > 0)):
        raise ValueError("need at least two positive values")
    slope = np.polyfit(np.arange(v.size), np.log(v), 1)[0]
    return float(np.exp(slope))


# -- bound parameters ---------------------------------------------------------

class _Alpha:
    """Resolves ``bound.alpha`` lazily, once per source."""

    def __init__(self, cfg: ExperimentConfig, f: Potential, target: GridDensity | None = None):
        self.cfg, self.f, self.target = cfg, f, target
        self._cache: dict[str, float] = {}

    def __call__(self, theorem: str) -> float:
        src = self.cfg.bound_alpha
        if not isinstance(src, str):
            return float(src)
        if src == "declared":
            reg = self.f.regularity
            if theorem == "PROX_PL":
                val = reg.pl_alpha
            else:
                val = reg.inequality_constant
                if val is None:
                    val = reg.alpha_strong_convexity
            if val is None or (theorem != "SLC" and not val > 0):
                raise ConfigError(
                    f"{self.f.name!r} declares no usable constant for {theorem}; "
                    "set bound.alpha to a number, poincare_estimate or certified_pl",
                    "bound.alpha")
            return float(val)
        if src not in self._cache:
            if src == "poincare_estimate":
                self._cache[src] = poincare_estimate(self.target)
            else:
                self._cache[src] = certify_pl_constant(self.f)
            log.info("bound.alpha = %s -> %.10g", src, self._cache[src])
        return self._cache[src]


def _bound_params(theorem: str, s: _Series, cfg: ExperimentConfig, alpha: _Alpha,
                  w2_initial) -> dict:
    eta = cfg.sampler.eta
    if theorem == "LC":
        p = {"W2_0": w2_initial(), "eta": eta}
        if cfg.lc_refined:
            p["H_0"] = s.values[0]
        return p
    p = {"alpha": alpha(theorem), "eta": eta}
    if theorem == "SLC":
        p["W2_0"] = s.values[0]
        return p
    p["D_0"] = s.values[0]
    if s.q is not None:
        p["q"] = s.q
    if theorem == "LOI":
        p["r"] = cfg.bound_r
        if cfg.loi_constant is not None:
            p["loi_constant"] = cfg.loi_constant
    return p


def _assemble(series: list[_Series], cfg: ExperimentConfig, alpha: _Alpha,
              w2_initial=None) -> list[ReportRow]:
    bounds = {}
    for s in series:
        bounds[s.label] = [
            RateBound(b, _bound_params(b, s, cfg, alpha, w2_initial))
            for b in cfg.bounds if THEOREM_METRIC[b] == s.kind
        ]
    rows = []
    n = len(series[0].values) if series else 0
    for k in range(n):
        for s in series:
            v = float(s.values[k])
            if not bounds[s.label]:
                rows.append(ReportRow(k, s.label, v))
            for rb in bounds[s.label]:
                try:
                    b = rb(k)
                except UndefinedBoundError:
                    rows.append(ReportRow(k, s.label, v, rb.theorem))
                    continue
                rows.append(ReportRow(k, s.label, v, rb.theorem, b, is_satisfied(v, b)))
    return rows


def _metric_series(cfg: ExperimentConfig, measure) -> list[_Series]:
    out = []
    for label in cfg.metrics:
        kind, q = parse_metric(label)
        out.append(_Series(label, kind, q, measure(kind, q)))
    return out


# -- experiments ----------------------------------------------------------------

def _quadratic_cov(cfg: ExperimentConfig) -> np.ndarray:
    return np.diag(1.0 / np.asarray(cfg.potential_params, dtype=float))


def _gaussian_init(cfg: ExperimentConfig, target_cov: np.ndarray) -> GaussianState:
    var = np.diag(target_cov) if cfg.init_var is None else np.asarray(cfg.init_var)
    return GaussianState(np.asarray(cfg.init_mean), np.diag(var))


def _gaussian_measure(kind: str, q, s: GaussianState, target: GaussianState) -> float:
    if kind == "KL":
        return kl_gauss(s, target)
    if kind == "CHI2":
        return chi2_gauss(s, target)
    if kind == "RENYI":
        return renyi_gauss(q, s, target)
    if kind == "W2":
        return w2_gauss(s, target)
    # VAR_GAP: spectral-norm distance of the covariance from the target's
    return float(np.linalg.norm(s.cov - target.cov, 2))


def _run_gaussian_exact(cfg: ExperimentConfig, f: Potential) -> list[ReportRow]:
    sc = cfg.sampler
    S = _quadratic_cov(cfg)
    target = GaussianState(np.zeros(f.dim), sc.eps * S)
    traj = gaussian_trajectory(_gaussian_init(cfg, target.cov), S, sc.eta, sc.iterations, sc.eps)
    series = _metric_series(cfg, lambda kind, q: [_gaussian_measure(kind, q, s, target) for s in traj])
    return _assemble(series, cfg, _Alpha(cfg, f), lambda: w2_gauss(traj[0], target))


def _scaled(f: Potential, eps: float) -> Potential:
    if eps == 1.0:
        return f
    fun = f.fun
    return dataclasses.replace(f, fun=lambda X: fun(X) / eps, grad=None, analytic_prox=None,
                               name=f"{f.name}/eps")


def _run_density1d(cfg: ExperimentConfig, f: Potential) -> list[ReportRow]:
    sc = cfg.sampler
    lo, hi, n = cfg.grid
    pi = grid_from_potential(_scaled(f, sc.eps), lo, hi, n)
    rho0 = GridDensity.gaussian(cfg.init_mean[0], cfg.init_var[0], lo, hi, n)
    traj = density_trajectory(rho0, f, sc.eta, sc.iterations, sc.eps)

    def measure(kind, q):
        if kind == "W2":
            return [w2_grid_1d(r, pi) for r in traj]
        key = ("RENYI", q) if kind == "RENYI" else kind
        return [divergence_grid(key, r, pi) for r in traj]

    series = _metric_series(cfg, measure)
    return _assemble(series, cfg, _Alpha(cfg, f, pi), lambda: w2_grid_1d(rho0, pi))


def initial_ensemble(cfg: ExperimentConfig, dim: int) -> ChainEnsemble:
    """Dirac or Gaussian initial ensemble, reproducible from the seed."""
    N = cfg.sampler.chains
    if cfg.init_dirac is not None:
        return ChainEnsemble.dirac(cfg.init_dirac, N)
    rng = np.random.default_rng([cfg.sampler.seed, _INIT_STREAM_TAG])
    m, v = np.asarray(cfg.init_mean), np.asarray(cfg.init_var)
    return ChainEnsemble(m + np.sqrt(v) * rng.standard_normal((N, dim)))


def _run_mc(cfg: ExperimentConfig, f: Potential) -> list[ReportRow]:
    sc = cfg.sampler
    traj = run(f, initial_ensemble(cfg, f.dim), sc)
    stats = traj[-1].rgo_stats
    if stats.calls:
        log.info("RGO: %d calls, %.4g mean trials, max %d", stats.calls,
                 stats.mean_trials, stats.max_trials_single_call)
    if cfg.trajectory is not None:
        write_trajectory_csv(traj, cfg.trajectory)
    pi = None
    if cfg.grid is not None:
        lo, hi, n = cfg.grid
        pi = grid_from_potential(_scaled(f, sc.eps), lo, hi, n)

    def w2(ens: ChainEnsemble) -> float:
        # sorted-sample coupling against the target's quantiles
        N = ens.n_chains
        qs = quantiles(pi, (np.arange(N) + 0.5) / N)
        return float(np.sqrt(np.mean((np.sort(ens.positions[:, 0]) - qs) ** 2)))

    def measure(kind, q):
        if kind == "W2":
            return [w2(e) for e in traj]
        return [float(np.linalg.norm(e.positions.mean(axis=0))) for e in traj]

    series = _metric_series(cfg, measure)
    return _assemble(series, cfg, _Alpha(cfg, f, pi), lambda: w2(traj[0]))


def _run_prox_point(cfg: ExperimentConfig, f: Potential) -> list[ReportRow]:
    if f.fmin is None:
        raise ConfigError(f"F_GAP needs the minimum value of {f.name!r}", "potential.name")
    sc = cfg.sampler
    traj = prox_point_run(f, sc.eta, cfg.init_dirac, sc.iterations)
    gap = [float(v - f.fmin) for v in traj.values]
    series = [_Series("F_GAP", "F_GAP", None, gap)]
    return _assemble(series, cfg, _Alpha(cfg, f))


def _run_eps_limit(cfg: ExperimentConfig, f: Potential) -> list[ReportRow]:
    sc = cfg.sampler
    S = _quadratic_cov(cfg)
    alpha = _Alpha(cfg, f)
    series, ratio_rows = [], {}
    for eps in cfg.eps_values:
        target = GaussianState(np.zeros(f.dim), eps * S)
        traj = gaussian_trajectory(_gaussian_init(cfg, target.cov), S, sc.eta, sc.iterations, eps)
        kl = [kl_gauss(s, target) for s in traj]
        label = f"KL(eps={eps:g})"
        series.append(_Series(label, "KL", None, kl))
        if "EPS_GENERALIZED" in cfg.bounds:
            # one-step factor of the same bound: H_0 = 1, k = 1
            factor = bound_eps_generalized(1.0, alpha("EPS_GENERALIZED"), sc.eta, 1)
            for k in range(1, len(kl)):
                if kl[k - 1] > 0:
                    r = kl[k] / kl[k - 1]
                    ratio_rows.setdefault(k, []).append(
                        ReportRow(k, f"KL_RATIO(eps={eps:g})", r, "EPS_GENERALIZED",
                                  factor, is_satisfied(r, factor)))
    rows = _assemble(series, cfg, alpha)
    out = []
    for k in range(sc.iterations + 1):
        out.extend(r for r in rows if r.k == k)
        out.extend(ratio_rows.get(k, []))
    return out


_RUNNERS = {
    "gaussian_exact": _run_gaussian_exact,
    "density1d": _run_density1d,
    "mc_sampler": _run_mc,
    "prox_point": _run_prox_point,
    "eps_limit": _run_eps_limit,
}


def run_experiment(cfg: ExperimentConfig) -> list[ReportRow]:
    """Rows ``(k, metric, measured, bound_name, bound, satisfied)``; deterministic per seed."""
    f = cfg.build_potential()
    log.info("running %s on %s (eta=%.6g, eps=%g, K=%d)", cfg.experiment, f.name,
             cfg.sampler.eta, cfg.sampler.eps, cfg.sampler.iterations)
    return _RUNNERS[cfg.experiment](cfg, f)


# -- report I/O -------------------------------------------------------------------

def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.17g}"


def write_report(rows, path) -> None:
    """CSV with header ``k,metric,measured,bound_name,bound,satisfied``."""
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(REPORT_HEADER)
            for r in rows:
                w.writerow([_fmt(r.k), r.metric, _fmt(r.measured), r.bound_name,
                            _fmt(r.bound), _fmt(r.satisfied)])
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write report {path}: {exc.strerror}") from None


def read_report(path) -> list[ReportRow]:
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != REPORT_HEADER:
            raise ValueError(f"{path}: unexpected header {header}")
        for k, metric, measured, name, bound, sat in reader:
            rows.append(ReportRow(
                int(k), metric, float(measured), name,
                float(bound) if bound else None,
                {"true": True, "false": False}.get(sat)))
    return rows


def resolve_output(cfg: ExperimentConfig, override=None) -> Path:
    """Report path: ``override``, else ``cfg.output``, else ``<experiment>.csv``.

    Relative paths are taken inside ``$PROXSAMPLER_OUTPUT_DIR`` when it is set.
    """
    p = Path(override or cfg.output or f"{cfg.experiment}.csv")
    base = os.environ.get(OUTPUT_DIR_ENV)
    if base and not p.is_absolute():
        p = Path(base) / p
    return p
