"""Cooperative training loop: per-round local SGD on every UE, upload of
weights and dataset sizes, size-weighted aggregation, broadcast.

One communication round t >= 1:
  1. the environment advances to round t,
  2. on refresh rounds every UE collects fresh samples and rolls its dataset,
  3. every UE trains locally from the current global weights (E epochs of
     minibatch SGD over a per-(seed, ue, round, epoch) shuffled permutation),
  4. the server aggregates weights proportionally to dataset sizes,
  5. the aggregate is evaluated and broadcast as the next global model.

Everything stochastic draws from named substreams of the run seed, and the
aggregation order is fixed by UE id, so runs are bit-reproducible for any
worker count.
"""
from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .aggregation import aggregate
from .environment import RoomEnvironment, advance
from .nn.network import Network
from .nn.weights import ModelWeights, save_weights, sgd_step
from .rng import substream
from .sensing import FeatureScaler, LocalDataset, collect, refresh


@dataclass
class FederationConfig:
    n_ues: int = 10
    local_epochs: int = 5
    minibatch_size: int = 128
    rounds: int = 200
    learning_rate: float = 0.01
    refresh_interval: int = 10
    seed: int = 0
    checkpoint_interval: int = 0  # 0 disables periodic checkpoints

    def __post_init__(self):
        for name in ("n_ues", "minibatch_size", "refresh_interval"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.local_epochs < 0 or self.rounds < 0:
            raise ValueError("local_epochs and rounds must be >= 0")
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be >= 0")


@dataclass
class FederationRound:
    """One communication round's log entry."""

    t: int
    local_updates: list | None      # (ue_id, ModelWeights, dataset size)
    global_weights: ModelWeights
    eval: object = None             # EvalReport from the evaluation hook
    train_loss: float = float("nan")


def minibatch_indices(n: int, batch_size: int, rng) -> list:
    """Chunks of a fresh shuffled permutation; the final short batch is kept."""
    perm = rng.permutation(n)
    return [perm[i:i + batch_size] for i in range(0, n, batch_size)]


def local_train(global_weights: ModelWeights, dataset: LocalDataset,
                cfg: FederationConfig, round_index: int, ue_id: int, *,
                network: Network, scaler: FeatureScaler):
    """E local epochs of minibatch SGD starting from the global weights.

    Returns (weights, dataset size, mean step loss). Deterministic given
    (cfg.seed, ue_id, round_index).
    """
    if len(dataset) == 0:
        raise ValueError(f"UE {ue_id} has an empty dataset")
    coords, powers = dataset.as_arrays()
    x = scaler.scale_powers(powers)
    y = scaler.scale_coordinates(coords)
    w = global_weights.copy()
    losses = []
    for epoch in range(cfg.local_epochs):
        perm_rng = substream(cfg.seed, "perm", ue_id, round_index, epoch)
        drop_rng = substream(cfg.seed, "dropout", ue_id, round_index, epoch)
        for batch in minibatch_indices(len(dataset), cfg.minibatch_size, perm_rng):
            loss, grad = network.loss_and_gradient(
                w, x[batch], y[batch], train=True, rng=drop_rng)
            w = sgd_step(w, grad, cfg.learning_rate)
            losses.append(loss)
    mean_loss = float(np.mean(losses)) if losses else float("nan")
    return w, len(dataset), mean_loss


def infer(global_weights: ModelWeights, powers, scaler: FeatureScaler,
          network: Network) -> np.ndarray:
    """Coordinate estimate in meters for one raw power vector."""
    if scaler is None:
        raise ValueError("inference requires the run's scaling manifest")
    x = scaler.scale_powers(np.asarray(powers, dtype=float)).reshape(1, -1)
    scaled = network.forward(global_weights, x, train=False)[0]
    return scaler.unscale_coordinates(scaled)


class FederationRun:
    """Owns one training run: environment evolution, datasets, round loop,
    and optional on-disk round metrics/checkpoints."""

    def __init__(self, base_env: RoomEnvironment, scenarios, network: Network,
                 cfg: FederationConfig, *, scaler: FeatureScaler,
                 trajectories: list, capacity: int = 900,
                 replace_fraction: float = 0.1, eval_hook=None,
                 stochastic: bool = False, workers: int = 1,
                 out_dir=None, keep_local_updates: bool = False,
                 manifest_extra: dict | None = None):
        if len(trajectories) != cfg.n_ues:
            raise ValueError("one trajectory per UE is required")
        if cfg.minibatch_size > capacity:
            raise ValueError("minibatch_size must not exceed dataset capacity")
        self.base_env = base_env
        self.scenarios = scenarios
        self.network = network
        self.cfg = cfg
        self.scaler = scaler
        self.trajectories = list(trajectories)
        self.capacity = capacity
        self.replace_fraction = replace_fraction
        self.eval_hook = eval_hook
        self.stochastic = stochastic
        self.workers = max(1, int(workers))
        self.out_dir = Path(out_dir) if out_dir is not None else None
        self.keep_local_updates = keep_local_updates
        self.manifest_extra = dict(manifest_extra or {})

    # -- dataset lifecycle ------------------------------------------------

    def _collect_for(self, ue_id: int, env, count: int, t: int) -> list:
        rng = substream(self.cfg.seed, "collect", ue_id, t)
        return collect(env, self.trajectories[ue_id], count, t, rng,
                       stochastic=self.stochastic)

    def _initial_datasets(self) -> list:
        env0 = advance(self.base_env, self.scenarios, 0)
        return [
            LocalDataset(ue_id=j, capacity=self.capacity,
                         samples=self._collect_for(j, env0, self.capacity, 0))
            for j in range(self.cfg.n_ues)
        ]

    def _is_refresh_round(self, t: int) -> bool:
        return t >= 1 and t % self.cfg.refresh_interval == 0

    def _refresh_datasets(self, datasets: list, env, t: int) -> list:
        count = int(round(self.replace_fraction * self.capacity))
        if count == 0:
            return datasets
        return [
            refresh(ds, self._collect_for(ds.ue_id, env, count, t),
                    self.replace_fraction)
            for ds in datasets
        ]

    def datasets_at(self, upto_round: int) -> list:
        """Replay collection/refresh events; training never alters datasets,
        so the state at any round is reconstructible for resume."""
        datasets = self._initial_datasets()
        for t in range(1, upto_round + 1):
            if self._is_refresh_round(t):
                env_t = advance(self.base_env, self.scenarios, t)
                datasets = self._refresh_datasets(datasets, env_t, t)
        return datasets

    # -- round loop --------------------------------------------------------

    def _train_all(self, global_weights: ModelWeights, datasets: list, t: int):
        def train_one(ue_id):
            return local_train(global_weights, datasets[ue_id], self.cfg, t,
                               ue_id, network=self.network, scaler=self.scaler)

        ue_ids = list(range(self.cfg.n_ues))
        if self.workers > 1:
            with ThreadPoolExecutor(max_workers=self.workers) as pool:
                results = list(pool.map(train_one, ue_ids))
        else:
            results = [train_one(j) for j in ue_ids]
        return results

    def execute(self, init_weights: ModelWeights | None = None,
                start_round: int = 0, progress=None) -> list:
        """Run rounds start_round+1 .. cfg.rounds; returns the round log.

        The round-0 entry holds the initial global weights and their
        evaluation under the round-0 environment, before any training.
        """
        if init_weights is None:
            init_weights = self.network.init_weights(
                substream(self.cfg.seed, "init"))
        self.network.check_layout(init_weights)
        datasets = self.datasets_at(start_round)
        global_weights = init_weights
        log: list = []
        writer = self._open_round_csv() if self.out_dir is not None else None
        try:
            if start_round == 0:
                entry = FederationRound(
                    t=0, local_updates=None, global_weights=global_weights,
                    eval=self._evaluate(0, global_weights))
                log.append(entry)
                self._write_round(writer, entry)
                self._maybe_checkpoint(entry)
            for t in range(start_round + 1, self.cfg.rounds + 1):
                env_t = advance(self.base_env, self.scenarios, t)
                if self._is_refresh_round(t):
                    datasets = self._refresh_datasets(datasets, env_t, t)
                results = self._train_all(global_weights, datasets, t)
                updates = [(j, results[j][0], results[j][1])
                           for j in range(self.cfg.n_ues)]
                global_weights = aggregate([(w, d) for _, w, d in updates])
                entry = FederationRound(
                    t=t,
                    local_updates=updates if self.keep_local_updates else None,
                    global_weights=global_weights,
                    eval=self._evaluate(t, global_weights),
                    train_loss=float(np.mean([r[2] for r in results])),
                )
                log.append(entry)
                self._write_round(writer, entry)
                self._maybe_checkpoint(entry)
                if progress is not None:
                    progress(entry)
        finally:
            if writer is not None:
                writer[0].close()
        if self.out_dir is not None:
            self._save_checkpoint(log[-1], final=True)
        return log

    def _evaluate(self, t: int, weights: ModelWeights):
        if self.eval_hook is None:
            return None
        env_t = advance(self.base_env, self.scenarios, t)
        return self.eval_hook(t, env_t, weights)

    # -- on-disk artifacts ---------------------------------------------------

    ROUND_CSV_HEADER = ["round", "mean_err_m", "median_err_m", "p95_err_m", "loss"]

    def _open_round_csv(self):
        self.out_dir.mkdir(parents=True, exist_ok=True)
        fh = open(self.out_dir / "rounds.csv", "w", newline="\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(self.ROUND_CSV_HEADER)
        return fh, writer

    def _write_round(self, writer, entry: FederationRound) -> None:
        if writer is None:
            return
        rep = entry.eval
        row = [entry.t]
        if rep is not None:
            row += [repr(float(rep.mean_m)), repr(float(rep.median_m)),
                    repr(float(rep.p95_m))]
        else:
            row += ["", "", ""]
        row.append(repr(float(entry.train_loss)))
        writer[1].writerow(row)
        writer[0].flush()

    def _maybe_checkpoint(self, entry: FederationRound) -> None:
        k = self.cfg.checkpoint_interval
        if self.out_dir is None or k <= 0 or entry.t % k != 0:
            return
        self._save_checkpoint(entry, final=False)

    def _save_checkpoint(self, entry: FederationRound, final: bool) -> None:
        from .sensing import write_manifest  # local import: io only

        stem = "checkpoint_final" if final else f"checkpoint_round_{entry.t:04d}"
        save_weights(entry.global_weights, self.out_dir / f"{stem}.wts")
        manifest = {
            "round": entry.t,
            "seed": self.cfg.seed,
            "stochastic": self.stochastic,
            "scaler": self.scaler.to_jsonable(),
        }
        manifest.update(self.manifest_extra)
        write_manifest(self.out_dir / f"{stem}.json", manifest)


def run_federation(base_env, scenarios, cfg: FederationConfig, *,
                   network: Network, scaler: FeatureScaler, trajectories,
                   eval_hook=None, capacity: int = 900,
                   replace_fraction: float = 0.1, stochastic: bool = False,
                   workers: int = 1, out_dir=None,
                   init_weights: ModelWeights | None = None) -> list:
    """Functional wrapper over FederationRun.execute."""
    run = FederationRun(
        base_env, scenarios, network, cfg, scaler=scaler,
        trajectories=trajectories, capacity=capacity,
        replace_fraction=replace_fraction, eval_hook=eval_hook,
        stochastic=stochastic, workers=workers, out_dir=out_dir)
    return run.execute(init_weights=init_weights)
