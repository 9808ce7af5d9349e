"""Proximal sampler on ensembles of independent chains.

Each iteration draws ``y = x + sqrt(eps eta) xi`` and then ``x' ~ pi_eps(. | y)``
through the restricted Gaussian oracle.  ``eps = 1`` is the standard sampler,
``eps = 0`` is the deterministic limit in which the iteration is the proximal
point method applied to every chain.

Chain ``i`` owns the random stream spawned from ``SeedSequence(seed)`` with
index ``i``, so trajectories do not depend on how chains are batched.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ValidationError
from .potential import Potential
from .proxopt import prox_batch
from .rgo import RgoStats, rgo_sample_batch

MAX_SNAPSHOT_ENTRIES = 10**8


@dataclass(frozen=True)
class SamplerConfig:
    """``eps = 0`` selects the deterministic proximal-point limit."""

    eta: float
    eps: float = 1.0
    iterations: int = 1
    chains: int = 1
    seed: int = 0

    def __post_init__(self):
        if not self.eta > 0:
            raise ValidationError("eta must be positive")
        if not self.eps >= 0:
            raise ValidationError("eps must be nonnegative (0 is the deterministic limit)")
        if int(self.iterations) != self.iterations or self.iterations < 0:
            raise ValidationError("iterations must be a nonnegative integer")
        if int(self.chains) != self.chains or self.chains < 1:
            raise ValidationError("chains must be a positive integer")

    @property
    def deterministic(self) -> bool:
        return self.eps == 0


@dataclass
class ChainEnsemble:
    positions: np.ndarray
    iteration: int = 0
    rgo_stats: RgoStats = field(default_factory=RgoStats)

    def __post_init__(self):
        X = np.asarray(self.positions, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        if X.ndim != 2 or X.shape[0] < 1:
            raise ValidationError("positions must have shape (N, d)")
        if not np.all(np.isfinite(X)):
            raise ValidationError("positions must be finite")
        self.positions = X

    @property
    def n_chains(self) -> int:
        return self.positions.shape[0]

    @property
    def dim(self) -> int:
        return self.positions.shape[1]

    @classmethod
    def dirac(cls, x0, n: int) -> "ChainEnsemble":
        x0 = np.atleast_1d(np.asarray(x0, dtype=float))
        return cls(np.tile(x0, (n, 1)))


def chain_streams(seed: int, n: int) -> list[np.random.Generator]:
    """One independent generator per chain, spawned deterministically from ``seed``."""
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n)]


def _draw(rng, n: int, d: int) -> np.ndarray:
    if isinstance(rng, np.random.Generator):
        return rng.standard_normal((n, d))
    if len(rng) != n:
        raise ValidationError("need one generator per chain")
    out = np.empty((n, d))
    for i, g in enumerate(rng):
        out[i] = g.standard_normal(d)
    return out


def forward_step(ens: ChainEnsemble, cfg: SamplerConfig, rng) -> np.ndarray:
    """Gaussian step ``y_i = x_i + sqrt(eps eta) xi_i``."""
    if cfg.deterministic:
        return ens.positions.copy()
    noise = _draw(rng, ens.n_chains, ens.dim)
    return ens.positions + np.sqrt(cfg.eps * cfg.eta) * noise


def backward_step(Y, f: Potential, cfg: SamplerConfig, rng,
                  stats: RgoStats | None = None, iteration: int = 1,
                  chain_ids=None) -> ChainEnsemble:
    """RGO step for every chain; in the ``eps = 0`` limit, the proximal map."""
    Y = np.asarray(Y, dtype=float)
    stats = stats if stats is not None else RgoStats()
    if cfg.deterministic:
        X = prox_batch(f, cfg.eta, Y, chain_ids=chain_ids)
    else:
        X = rgo_sample_batch(f, Y, cfg.eta, cfg.eps, rng, stats, chain_ids=chain_ids)
    return ChainEnsemble(X, iteration, stats)


def _check_memory(init: ChainEnsemble, cfg: SamplerConfig) -> None:
    entries = init.n_chains * init.dim * (cfg.iterations + 1)
    if entries > MAX_SNAPSHOT_ENTRIES:
        raise ValidationError(f"trajectory would hold {entries:.3g} values (limit {MAX_SNAPSHOT_ENTRIES:.0e})")


def run(f: Potential, init: ChainEnsemble, cfg: SamplerConfig,
        serial: bool = False) -> list[ChainEnsemble]:
    """Run ``cfg.iterations`` sampler iterations from ``init``.

    Returns ``[init, x_1, ..., x_K]``.  ``serial=True`` advances one chain at
    a time instead of the whole ensemble at once; both modes produce the
    same trajectory.
    """
    if init.dim != f.dim:
        raise ValidationError(f"ensemble dimension {init.dim} differs from potential dimension {f.dim}")
    if init.n_chains != cfg.chains:
        raise ValidationError(f"ensemble has {init.n_chains} chains, config asks for {cfg.chains}")
    _check_memory(init, cfg)
    streams = chain_streams(cfg.seed, cfg.chains)
    if serial:
        return _run_serial(f, init, cfg, streams)
    traj = [init]
    stats = RgoStats()
    ens = init
    ids = np.arange(cfg.chains)
    for k in range(1, cfg.iterations + 1):
        Y = forward_step(ens, cfg, streams)
        ens = backward_step(Y, f, cfg, streams, stats, k, chain_ids=ids)
        traj.append(ChainEnsemble(ens.positions, k, _copy_stats(stats)))
    return traj


def _copy_stats(s: RgoStats) -> RgoStats:
    out = RgoStats()
    out.merge(s)
    return out


def _run_serial(f, init, cfg, streams: Sequence[np.random.Generator]) -> list[ChainEnsemble]:
    K, N = cfg.iterations, cfg.chains
    paths = np.empty((K + 1, N, init.dim))
    paths[0] = init.positions
    stats_k = [RgoStats() for _ in range(K + 1)]
    for i in range(N):
        one = ChainEnsemble(init.positions[i:i + 1])
        rng = [streams[i]]
        for k in range(1, K + 1):
            st = RgoStats()
            Y = forward_step(one, cfg, rng)
            one = backward_step(Y, f, cfg, rng, st, k, chain_ids=[i])
            paths[k, i] = one.positions[0]
            stats_k[k].merge(st)
    traj = [init]
    total = RgoStats()
    for k in range(1, K + 1):
        total.merge(stats_k[k])
        traj.append(ChainEnsemble(paths[k], k, _copy_stats(total)))
    return traj


def write_trajectory_csv(traj: Sequence[ChainEnsemble], path) -> None:
    """Long-format CSV with columns ``iteration,chain,coordinate,value``."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iteration", "chain", "coordinate", "value"])
        for ens in traj:
            for c, row in enumerate(ens.positions):
                for j, v in enumerate(row):
                    w.writerow([ens.iteration, c, j, f"{v:.17g}"])
