"""SVG line charts from the run CSVs (rounds, CDF, scenario comparison)."""
from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def _read_csv(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [row for row in reader if row]
    return header, rows


def plot_csv(csv_path, out_path) -> None:
    header, rows = _read_csv(csv_path)
    fig, ax = plt.subplots(figsize=(7, 4.5))
    if header[:2] == ["threshold_m", "fraction"]:
        by_method: dict = {}
        for tau, frac, method in rows:
            by_method.setdefault(method, []).append((float(tau), float(frac)))
        for method, pts in by_method.items():
            pts.sort()
            ax.plot([p[0] for p in pts], [p[1] for p in pts], label=method)
        ax.set_xlabel("positioning error (m)")
        ax.set_ylabel("empirical CDF")
        ax.set_ylim(0, 1.02)
        ax.legend()
    elif header[:2] == ["scenario", "method"]:
        series: dict = {}
        for scenario, method, rnd, mean, _, _ in rows:
            series.setdefault(f"{scenario}/{method}", []).append(
                (int(rnd), float(mean)))
        for label, pts in series.items():
            pts.sort()
            ax.plot([p[0] for p in pts], [p[1] for p in pts], label=label)
        ax.set_xlabel("communication round")
        ax.set_ylabel("mean positioning error (m)")
        ax.legend(fontsize=8)
    elif header[0] == "round":
        # single-run rounds.csv or multi-method long format
        if "method" in header:
            series = {}
            mi = header.index("method")
            vi = header.index("mean_err_m")
            for row in rows:
                series.setdefault(row[mi], []).append(
                    (int(row[0]), float(row[vi])))
            for label, pts in series.items():
                pts.sort()
                ax.plot([p[0] for p in pts], [p[1] for p in pts], label=label)
            ax.legend()
        else:
            vi = header.index("mean_err_m")
            pts = [(int(r[0]), float(r[vi])) for r in rows if r[vi]]
            ax.plot([p[0] for p in pts], [p[1] for p in pts])
        ax.set_xlabel("communication round")
        ax.set_ylabel("mean positioning error (m)")
    else:
        raise ValueError(f"unrecognized CSV schema: {header}")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(Path(out_path), format="svg")
    plt.close(fig)
