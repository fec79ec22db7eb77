"""Positioning-error statistics: per-point errors, summary stats, empirical
CDF, and the CSV emitters consumed by the plotting subcommand."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .optics import power_vector
from .rng import substream


def positioning_errors(predictions, truths) -> np.ndarray:
    """Euclidean distance per (prediction, truth) pair, in meters."""
    predictions = np.asarray(predictions, dtype=float)
    truths = np.asarray(truths, dtype=float)
    if predictions.shape != truths.shape:
        raise ValueError("predictions and truths must have equal shapes")
    return np.linalg.norm(predictions - truths, axis=-1)


def empirical_cdf(errors, thresholds) -> list:
    """Fraction of errors <= tau for each threshold (right-continuous)."""
    errors = np.asarray(errors, dtype=float)
    if errors.size == 0:
        raise ValueError("empirical_cdf requires at least one error value")
    thresholds = list(thresholds)
    if any(b < a for a, b in zip(thresholds, thresholds[1:])):
        raise ValueError("thresholds must be sorted ascending")
    n = errors.size
    return [(float(tau), float(np.count_nonzero(errors <= tau) / n))
            for tau in thresholds]


def default_thresholds(max_m: float = 0.5, step_m: float = 0.005) -> np.ndarray:
    n = int(round(max_m / step_m))
    return np.linspace(0.0, n * step_m, n + 1)


@dataclass
class EvalReport:
    round: int
    per_point_errors_m: np.ndarray
    mean_m: float
    median_m: float
    p95_m: float
    cdf: list

    def cdf_at(self, threshold_m: float) -> float:
        errors = self.per_point_errors_m
        return float(np.count_nonzero(errors <= threshold_m) / errors.size)


def make_report(round_index: int, errors, thresholds=None) -> EvalReport:
    errors = np.asarray(errors, dtype=float)
    if thresholds is None:
        thresholds = default_thresholds()
    return EvalReport(
        round=round_index,
        per_point_errors_m=errors,
        mean_m=float(np.mean(errors)),
        median_m=float(np.median(errors)),
        p95_m=float(np.percentile(errors, 95)),
        cdf=empirical_cdf(errors, thresholds),
    )


def evaluation_grid(dims, z_plane_m: float = 0.85, n: int = 41) -> np.ndarray:
    """Held-out n x n test grid over the sampling plane."""
    xs = np.linspace(0.0, float(dims[0]), n)
    ys = np.linspace(0.0, float(dims[1]), n)
    gx, gy = np.meshgrid(xs, ys, indexing="xy")
    return np.stack([gx.ravel(), gy.ravel(), np.full(gx.size, z_plane_m)], axis=1)


def grid_powers(env, positions, *, seed: int = 0, round_index: int = 0,
                stochastic: bool = False) -> np.ndarray:
    """Measured power vectors for a batch of positions under one environment."""
    rng = substream(seed, "eval", round_index) if stochastic else None
    return np.stack([
        power_vector(env.leds, pos, env.pd, env.patches, env.noise,
                     rng=rng, stochastic=stochastic)
        for pos in positions
    ])


def make_grid_evaluator(network, scaler, positions, *, thresholds=None,
                        seed: int = 0, stochastic: bool = False,
                        error_dim: int = 3):
    """Evaluation hook for the federation loop.

    Regenerates grid measurements under the current round's environment so
    reported error tracks the real-time channel.
    """
    if error_dim not in (2, 3):
        raise ValueError("error_dim must be 2 or 3")
    positions = np.asarray(positions, dtype=float)

    def hook(round_index, env, weights) -> EvalReport:
        powers = grid_powers(env, positions, seed=seed,
                             round_index=round_index, stochastic=stochastic)
        scaled = scaler.scale_powers(powers)
        predictions = scaler.unscale_coordinates(
            network.forward(weights, scaled, train=False))
        if error_dim == 2:
            errors = positioning_errors(predictions[:, :2], positions[:, :2])
        else:
            errors = positioning_errors(predictions, positions)
        return make_report(round_index, errors, thresholds)

    return hook


def _fmt(value: float) -> str:
    return repr(float(value))


def write_cdf_csv(path, cdf_by_method: dict) -> None:
    """cdf.csv: threshold_m,fraction,method (one block per method)."""
    with open(Path(path), "w", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["threshold_m", "fraction", "method"])
        for method, cdf in cdf_by_method.items():
            for tau, frac in cdf:
                writer.writerow([_fmt(tau), _fmt(frac), method])


def write_rounds_csv(path, reports_by_method: dict) -> None:
    """rounds.csv: per-round summary per method (long format)."""
    with open(Path(path), "w", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["round", "method", "mean_err_m", "median_err_m",
                         "p95_err_m"])
        for method, reports in reports_by_method.items():
            for rep in reports:
                writer.writerow([rep.round, method, _fmt(rep.mean_m),
                                 _fmt(rep.median_m), _fmt(rep.p95_m)])


def write_comparison_csv(path, rows) -> None:
    """Long-format scenario comparison: scenario,method,round,mean/median/p95."""
    with open(Path(path), "w", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["scenario", "method", "round", "mean_err_m",
                         "median_err_m", "p95_err_m"])
        for scenario, method, rep in rows:
            writer.writerow([scenario, method, rep.round, _fmt(rep.mean_m),
                             _fmt(rep.median_m), _fmt(rep.p95_m)])
