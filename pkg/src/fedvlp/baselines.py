"""Comparison methods: weighted k-nearest-neighbors fingerprinting on the
pooled (centralized) dataset, a dense-stack regressor trained under the same
federation loop, and a frozen one-shot model for nonstationary comparisons."""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .federation import FederationConfig, local_train
from .nn.network import Network, build_dense_stack
from .nn.weights import ModelWeights
from .rng import substream
from .sensing import FeatureScaler, LocalDataset


class Weighting(str, Enum):
    INVERSE_DISTANCE = "inverse_distance"
    UNIFORM = "uniform"


KNN_DISTANCE_EPS = 1e-12  # regularizes inverse-distance weights at zero


@dataclass
class KnnModel:
    """k-NN over pooled fingerprints, distances in scaled feature space."""

    k: int
    fingerprints: list                 # pooled Samples
    weighting: Weighting
    scaler: FeatureScaler
    _features: np.ndarray = field(init=False, repr=False)
    _coordinates: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.weighting = Weighting(self.weighting)
        if not self.fingerprints:
            raise ValueError("k-NN requires at least one fingerprint")
        if not 1 <= self.k <= len(self.fingerprints):
            raise ValueError("k must lie in [1, number of fingerprints]")
        self._features = self.scaler.scale_powers(
            np.stack([s.powers for s in self.fingerprints]))
        self._coordinates = np.stack([s.coordinate for s in self.fingerprints])


def fit_knn(datasets, scaler: FeatureScaler, k: int = 4,
            weighting=Weighting.INVERSE_DISTANCE) -> KnnModel:
    """Pool every UE's samples into one centralized fingerprint database."""
    pooled = [s for ds in datasets for s in ds.samples]
    return KnnModel(k=k, fingerprints=pooled, weighting=weighting, scaler=scaler)


def knn_predict(model: KnnModel, powers) -> np.ndarray:
    """Weighted mean coordinate of the k nearest fingerprints.

    Ties in distance are broken by fingerprint insertion order.
    """
    if model.k > len(model.fingerprints):
        raise ValueError("k exceeds the number of fingerprints")
    query = model.scaler.scale_powers(np.asarray(powers, dtype=float))
    delta = model._features - query
    distances = np.sqrt(np.einsum("ij,ij->i", delta, delta))
    nearest = np.argsort(distances, kind="stable")[:model.k]
    if model.weighting is Weighting.INVERSE_DISTANCE:
        w = 1.0 / (distances[nearest] + KNN_DISTANCE_EPS)
    else:
        w = np.ones(model.k)
    return (w[:, None] * model._coordinates[nearest]).sum(axis=0) / w.sum()


def mlp_network(n_inputs: int = 16, hidden=(64, 64), output_dim: int = 3) -> Network:
    """The dense benchmark regressor, same weight machinery and federation
    loop as the conv-LSTM model."""
    return build_dense_stack(n_inputs, hidden, output_dim)


def build_mlp(n_inputs: int = 16, hidden=(64, 64), output_dim: int = 3,
              rng=None):
    """(network, initialized weights) for the dense benchmark."""
    net = mlp_network(n_inputs, hidden, output_dim)
    if rng is None:
        weights = net.zero_weights()
    else:
        weights = net.init_weights(rng)
    return net, weights


def pool_datasets(datasets, ue_id: int = 0) -> LocalDataset:
    pooled = [s for ds in datasets for s in ds.samples]
    return LocalDataset(ue_id=ue_id, samples=pooled, capacity=max(1, len(pooled)))


def frozen_centralized(datasets, network: Network, scaler: FeatureScaler, *,
                       init_weights: ModelWeights | None = None,
                       epochs: int = 50, minibatch_size: int = 128,
                       learning_rate: float = 0.01, seed: int = 0) -> ModelWeights:
    """One-shot site survey: train centrally on all round-0 data, then freeze.

    Reuses the local training machinery on the pooled dataset (one virtual
    client, many epochs); the returned weights are never updated again.
    """
    pooled = pool_datasets(datasets)
    # dedicated sub-seed keeps the central permutation/dropout streams
    # disjoint from every federated client's streams
    central_seed = int(substream(seed, "central").integers(0, 2 ** 63))
    cfg = FederationConfig(
        n_ues=1, local_epochs=epochs, minibatch_size=minibatch_size,
        rounds=0, learning_rate=learning_rate, seed=central_seed)
    if init_weights is None:
        init_weights = network.init_weights(substream(seed, "init"))
    weights, _, _ = local_train(init_weights, pooled, cfg, 0, pooled.ue_id,
                                network=network, scaler=scaler)
    return weights


__all__ = [
    "KnnModel",
    "Weighting",
    "build_mlp",
    "fit_knn",
    "frozen_centralized",
    "knn_predict",
    "mlp_network",
    "pool_datasets",
]
