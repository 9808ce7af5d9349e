"""Experiment configuration: a flat TOML document with dotted sections.

Example::

    experiment = "gaussian_exact"
    metrics = ["KL", "W2"]
    bounds = ["LSI_KL", "SLC"]

    [potential]
    name = "quadratic"
    params = [1.0]

    [sampler]
    eta = 1.0
    iterations = 5

    [init]
    mean = [1.0]
    var = [5.0]

Recognised keys are listed in :data:`SCHEMA`; anything else is rejected.
``sampler.eta`` may be replaced by ``sampler.step_rule`` (``smooth_beta`` or
``lipschitz_M``), resolved through :func:`proxsampler.rates.suggest_step_size`.
"""
from __future__ import annotations

import math
import re
import sys
from dataclasses import dataclass

import tomli_w

from .errors import ConfigError, ValidationError
from .potential import Potential, builtin
from .rates import THEOREM_METRIC, THEOREMS, suggest_step_size
from .sampler import SamplerConfig

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

EXPERIMENTS = ("gaussian_exact", "mc_sampler", "density1d", "prox_point", "eps_limit")

# metrics each experiment can measure; RENYI stands for RENYI(q)
EXPERIMENT_METRICS = {
    "gaussian_exact": ("KL", "CHI2", "RENYI", "W2", "VAR_GAP"),
    "density1d": ("KL", "CHI2", "RENYI", "W2"),
    "mc_sampler": ("W2", "MEAN"),
    "prox_point": ("F_GAP",),
    "eps_limit": ("KL",),
}

ALPHA_SOURCES = ("declared", "poincare_estimate", "certified_pl")

# dotted key -> accepted python types
SCHEMA = {
    "experiment": (str,),
    "output": (str,),
    "trajectory": (str,),
    "metrics": (list,),
    "bounds": (list,),
    "potential.name": (str,),
    "potential.params": (list,),
    "sampler.eta": (int, float),
    "sampler.step_rule": (str,),
    "sampler.step_constant": (int, float),
    "sampler.step_prefactor": (int, float),
    "sampler.eps": (int, float),
    "sampler.eps_values": (list,),
    "sampler.iterations": (int,),
    "sampler.chains": (int,),
    "sampler.seed": (int,),
    "init.mean": (list,),
    "init.var": (list,),
    "init.dirac": (list,),
    "grid.lo": (int, float),
    "grid.hi": (int, float),
    "grid.n": (int,),
    "bound.alpha": (int, float, str),
    "bound.r": (int, float),
    "bound.loi_constant": (int, float),
    "bound.lc_refined": (bool,),
}

REQUIRED = ("experiment", "potential.name", "sampler.iterations")

_RENYI = re.compile(r"^RENYI\((.+)\)$")


def parse_metric(name: str) -> tuple[str, float | None]:
    """``"RENYI(2)"`` -> ``("RENYI", 2.0)``; other names pass through."""
    m = _RENYI.match(name.strip().upper())
    if m:
        try:
            q = float(m.group(1))
        except ValueError:
            raise ConfigError(f"bad Renyi order in {name!r}", "metrics") from None
        if not q >= 1 or not math.isfinite(q):
            raise ConfigError(f"Renyi order must be >= 1, got {name!r}", "metrics")
        return "RENYI", q
    return name.strip().upper(), None


def metric_label(kind: str, q: float | None) -> str:
    return f"RENYI({q:g})" if kind == "RENYI" else kind


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    potential: str
    potential_params: tuple[float, ...]
    sampler: SamplerConfig
    metrics: tuple[str, ...] = ()
    bounds: tuple[str, ...] = ()
    init_mean: tuple[float, ...] | None = None
    init_var: tuple[float, ...] | None = None
    init_dirac: tuple[float, ...] | None = None
    grid: tuple[float, float, int] | None = None
    eps_values: tuple[float, ...] = ()
    bound_alpha: float | str = "declared"
    bound_r: float | None = None
    loi_constant: float | None = None
    lc_refined: bool = False
    output: str | None = None
    trajectory: str | None = None
    # how eta was specified; kept so that serialization reproduces the input
    step_rule: str | None = None
    step_constant: float | None = None
    step_prefactor: float | None = None

    def build_potential(self) -> Potential:
        return builtin(self.potential, self.potential_params)


# -- parsing ------------------------------------------------------------------

def _flatten(doc: dict, prefix: str = "") -> dict:
    out = {}
    for k, v in doc.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(_flatten(v, key + "."))
        else:
            out[key] = v
    return out


def _numbers(flat: dict, key: str) -> tuple[float, ...] | None:
    if key not in flat:
        return None
    vals = flat[key]
    if not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in vals):
        raise ConfigError("expected a list of numbers", key)
    return tuple(float(v) for v in vals)


def _check_types(flat: dict) -> None:
    for key, val in flat.items():
        if key not in SCHEMA:
            raise ConfigError("unknown key", key)
        types = SCHEMA[key]
        if isinstance(val, bool) and bool not in types:
            raise ConfigError("booleans are not accepted here", key)
        if not isinstance(val, types):
            names = "/".join(t.__name__ for t in types)
            raise ConfigError(f"expected {names}, got {type(val).__name__}", key)
    for key in REQUIRED:
        if key not in flat:
            raise ConfigError("missing required key", key)


def _resolve_eta(flat: dict, f: Potential) -> float:
    has_eta, has_rule = "sampler.eta" in flat, "sampler.step_rule" in flat
    if has_eta == has_rule:
        raise ConfigError("give exactly one of sampler.eta and sampler.step_rule", "sampler.eta")
    if has_eta:
        return float(flat["sampler.eta"])
    rule = flat["sampler.step_rule"]
    reg = f.regularity
    default = {"smooth_beta": reg.beta_smoothness, "lipschitz_M": reg.lipschitz_M}
    if rule not in default:
        raise ConfigError(f"unknown step rule {rule!r}; use smooth_beta or lipschitz_M",
                          "sampler.step_rule")
    constant = flat.get("sampler.step_constant", default[rule])
    if constant is None:
        raise ConfigError(f"potential {f.name!r} declares no constant for {rule}; "
                          "set sampler.step_constant", "sampler.step_constant")
    prefactor = flat.get("sampler.step_prefactor", 0.5)
    try:
        return suggest_step_size(rule, float(constant), f.dim, float(prefactor))
    except ValidationError as exc:
        raise ConfigError(str(exc), "sampler.step_rule") from None


def _check_metrics_and_bounds(exp: str, metrics: tuple[str, ...], bounds: tuple[str, ...],
                              flat: dict) -> None:
    allowed = EXPERIMENT_METRICS[exp]
    kinds = {}
    for m in metrics:
        kind, q = parse_metric(m)
        if kind not in allowed:
            raise ConfigError(f"metric {m!r} is not available for {exp}; choose from {allowed}",
                              "metrics")
        kinds.setdefault(kind, []).append(q)
    for b in bounds:
        if b not in THEOREMS:
            raise ConfigError(f"unknown bound {b!r}; choose from {THEOREMS}", "bounds")
        need = THEOREM_METRIC[b]
        if need not in kinds:
            raise ConfigError(f"bound {b} controls {need}, which is not among the metrics",
                              "bounds")
        if b in ("PI_RENYI", "LOI"):
            low = [q for q in kinds["RENYI"] if q < 2]
            if low:
                raise ConfigError(f"{b} requires q ≥ 2; got RENYI({low[0]:g})", "bounds")
        if b == "LOI" and "bound.r" not in flat:
            raise ConfigError("LOI needs the order bound.r", "bound.r")


def _check_experiment(exp: str, f: Potential, flat: dict, cfg: dict) -> None:
    if exp in ("gaussian_exact", "eps_limit") and f.name != "quadratic":
        raise ConfigError(f"{exp} needs the quadratic potential", "potential.name")
    if exp == "density1d":
        if f.dim != 1:
            raise ConfigError("density1d needs a 1-D potential", "potential.name")
        if cfg["grid"] is None:
            raise ConfigError("density1d needs grid.lo, grid.hi and grid.n", "grid")
    if exp in ("mc_sampler", "prox_point", "density1d", "gaussian_exact"):
        if cfg["init_mean"] is None and cfg["init_dirac"] is None:
            raise ConfigError("give init.mean (with init.var) or init.dirac", "init")
    if cfg["init_dirac"] is not None and cfg["init_mean"] is not None:
        raise ConfigError("init.dirac excludes init.mean and init.var", "init.dirac")
    if exp in ("density1d", "gaussian_exact", "eps_limit") and cfg["init_dirac"] is not None:
        raise ConfigError(f"{exp} needs a Gaussian init (init.mean, init.var)", "init.dirac")
    if exp == "prox_point" and cfg["init_dirac"] is None:
        raise ConfigError("prox_point starts from a point; set init.dirac", "init.dirac")
    if exp == "mc_sampler" and cfg["init_mean"] is not None and cfg["init_var"] is None:
        raise ConfigError("a Gaussian init needs init.var", "init.var")
    if exp == "density1d" and cfg["init_var"] is None:
        raise ConfigError("a Gaussian init needs init.var", "init.var")
    for key in ("init_mean", "init_var", "init_dirac"):
        v = cfg[key]
        if v is not None and len(v) != f.dim:
            raise ConfigError(f"expected {f.dim} entries", key.replace("_", ".", 1))
    if cfg["init_var"] is not None and any(not v > 0 for v in cfg["init_var"]):
        raise ConfigError("variances must be positive", "init.var")
    if exp == "eps_limit":
        if not cfg["eps_values"]:
            raise ConfigError("eps_limit needs sampler.eps_values", "sampler.eps_values")
        if any(not e > 0 for e in cfg["eps_values"]):
            raise ConfigError("every eps must be positive", "sampler.eps_values")
        if cfg["init_mean"] is None:
            raise ConfigError("eps_limit needs init.mean", "init.mean")
    if "W2" in cfg["metrics"] and exp == "mc_sampler":
        if f.dim != 1 or cfg["grid"] is None:
            raise ConfigError("Monte Carlo W2 is computed in 1-D against a grid target; "
                              "set grid.lo, grid.hi, grid.n", "metrics")
    alpha = cfg["bound_alpha"]
    if isinstance(alpha, str) and alpha not in ALPHA_SOURCES:
        raise ConfigError(f"bound.alpha must be a number or one of {ALPHA_SOURCES}", "bound.alpha")
    if alpha == "poincare_estimate" and cfg["grid"] is None:
        raise ConfigError("poincare_estimate needs a grid", "bound.alpha")


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate a configuration document."""
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"malformed document: {exc}") from None
    flat = _flatten(doc)
    _check_types(flat)
    exp = flat["experiment"]
    if exp not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {exp!r}; choose from {EXPERIMENTS}", "experiment")
    params = _numbers(flat, "potential.params") or ()
    try:
        f = builtin(flat["potential.name"], params)
    except ConfigError as exc:
        raise ConfigError(str(exc), "potential.name") from None
    except ValidationError as exc:
        raise ConfigError(str(exc), "potential.params") from None

    metrics = tuple(flat.get("metrics", ()))
    bounds = tuple(flat.get("bounds", ()))
    if not all(isinstance(m, str) for m in metrics + bounds):
        raise ConfigError("metrics and bounds must be lists of strings", "metrics")
    metrics = tuple(metric_label(*parse_metric(m)) for m in metrics)
    if exp == "eps_limit" and not metrics:
        metrics = ("KL",)
    if exp == "prox_point" and not metrics:
        metrics = ("F_GAP",)
    _check_metrics_and_bounds(exp, metrics, bounds, flat)

    eta = _resolve_eta(flat, f)
    grid = None
    if any(k.startswith("grid.") for k in flat):
        if not all(k in flat for k in ("grid.lo", "grid.hi", "grid.n")):
            raise ConfigError("grid needs lo, hi and n", "grid")
        grid = (float(flat["grid.lo"]), float(flat["grid.hi"]), int(flat["grid.n"]))
        if not grid[0] < grid[1] or grid[2] < 3:
            raise ConfigError("need grid.lo < grid.hi and grid.n >= 3", "grid")
    alpha = flat.get("bound.alpha", "declared")
    cfg = dict(
        experiment=exp, potential=f.name, potential_params=tuple(params),
        metrics=metrics, bounds=bounds,
        init_mean=_numbers(flat, "init.mean"), init_var=_numbers(flat, "init.var"),
        init_dirac=_numbers(flat, "init.dirac"), grid=grid,
        eps_values=_numbers(flat, "sampler.eps_values") or (),
        bound_alpha=alpha if isinstance(alpha, str) else float(alpha),
        bound_r=float(flat["bound.r"]) if "bound.r" in flat else None,
        loi_constant=float(flat["bound.loi_constant"]) if "bound.loi_constant" in flat else None,
        lc_refined=bool(flat.get("bound.lc_refined", False)),
        output=flat.get("output"), trajectory=flat.get("trajectory"),
        step_rule=flat.get("sampler.step_rule"),
        step_constant=float(flat["sampler.step_constant"]) if "sampler.step_constant" in flat else None,
        step_prefactor=float(flat["sampler.step_prefactor"]) if "sampler.step_prefactor" in flat else None,
    )
    _check_experiment(exp, f, flat, cfg)
    try:
        cfg["sampler"] = SamplerConfig(
            eta=eta, eps=float(flat.get("sampler.eps", 1.0)),
            iterations=flat["sampler.iterations"], chains=flat.get("sampler.chains", 1),
            seed=flat.get("sampler.seed", 0))
    except ValidationError as exc:
        raise ConfigError(str(exc), "sampler") from None
    if cfg["sampler"].eps == 0 and exp != "mc_sampler":
        raise ConfigError("eps = 0 (the deterministic limit) only applies to mc_sampler",
                          "sampler.eps")
    if cfg["sampler"].eps == 0 and "W2" in metrics:
        raise ConfigError("W2 to the target is undefined in the eps = 0 limit", "metrics")
    return ExperimentConfig(**cfg)


def load_config(path) -> ExperimentConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    return parse_config(text)


# -- serialization --------------------------------------------------------------

def to_document(cfg: ExperimentConfig) -> dict:
    """Nested dict that :func:`parse_config` maps back to ``cfg``."""
    doc: dict = {"experiment": cfg.experiment}
    for key in ("output", "trajectory"):
        if getattr(cfg, key) is not None:
            doc[key] = getattr(cfg, key)
    if cfg.metrics:
        doc["metrics"] = list(cfg.metrics)
    if cfg.bounds:
        doc["bounds"] = list(cfg.bounds)
    doc["potential"] = {"name": cfg.potential, "params": list(cfg.potential_params)}
    s = cfg.sampler
    sampler: dict = {}
    if cfg.step_rule is None:
        sampler["eta"] = s.eta
    else:
        sampler["step_rule"] = cfg.step_rule
        if cfg.step_constant is not None:
            sampler["step_constant"] = cfg.step_constant
        if cfg.step_prefactor is not None:
            sampler["step_prefactor"] = cfg.step_prefactor
    sampler.update(eps=s.eps, iterations=int(s.iterations), chains=int(s.chains), seed=int(s.seed))
    if cfg.eps_values:
        sampler["eps_values"] = list(cfg.eps_values)
    doc["sampler"] = sampler
    init = {k: list(v) for k, v in (("mean", cfg.init_mean), ("var", cfg.init_var),
                                    ("dirac", cfg.init_dirac)) if v is not None}
    if init:
        doc["init"] = init
    if cfg.grid is not None:
        doc["grid"] = {"lo": cfg.grid[0], "hi": cfg.grid[1], "n": cfg.grid[2]}
    bound: dict = {"alpha": cfg.bound_alpha, "lc_refined": cfg.lc_refined}
    if cfg.bound_r is not None:
        bound["r"] = cfg.bound_r
    if cfg.loi_constant is not None:
        bound["loi_constant"] = cfg.loi_constant
    doc["bound"] = bound
    return doc


def serialize_config(cfg: ExperimentConfig) -> str:
    return tomli_w.dumps(to_document(cfg))
