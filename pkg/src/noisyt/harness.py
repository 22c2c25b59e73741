"""Experiment orchestration: seeded sweeps over sample sizes, CSV and SVG output.

Every sweep cell (one sample size, one repeat) derives its seed from the
base seed with a splitmix-style 64-bit mix, so cells are independent of
execution order and the whole sweep is reproducible bit for bit (wall
times aside).  Cells run sequentially by default; pass ``jobs`` or set
``NOISYT_JOBS`` to fan out over processes.
"""

from __future__ import annotations

import csv
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .core import Dataset, TransitionMatrix
from .estimators import ESTIMATORS
from .models import split_train_val, train_classifier
from .noise import corrupt, noise_matrix
from .synth import GaussianSpec, generate

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def _splitmix64(z: int) -> int:
    z = (z + _GOLDEN) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def mix_seed(*parts: int) -> int:
    """Fold integers into one 64-bit seed (splitmix64 chain, order sensitive)."""
    z = 0
    for p in parts:
        z = _splitmix64(z ^ (int(p) & _MASK64))
    return z


@dataclass(frozen=True)
class SweepConfig:
    """One sweep: a noise model crossed with sample sizes and repeats."""

    noise_kind: str
    eps: float
    sample_sizes: tuple = (2000, 5000, 10000, 20000, 40000)
    repeats: int = 5
    base_seed: int = 0
    estimators: tuple = ("t", "dualt")
    test_size: int = 1000
    gaussian: GaussianSpec = GaussianSpec()
    val_fraction: float = 0.2
    model_params: dict = field(default_factory=dict)

    def validate(self):
        if self.repeats < 1:
            raise ValueError(f"repeats must be >= 1, got {self.repeats}")
        sizes = tuple(self.sample_sizes)
        if not sizes or any(b <= a for a, b in zip(sizes, sizes[1:])) or sizes[0] < 1:
            raise ValueError(f"sample_sizes must be strictly ascending positives, got {sizes}")
        unknown = set(self.estimators) - set(ESTIMATORS)
        if unknown or not self.estimators:
            raise ValueError(f"estimators must be a non-empty subset of {sorted(ESTIMATORS)}")


@dataclass(frozen=True)
class CellRecord:
    """One (sample size, repeat, estimator) measurement."""

    noise_kind: str
    eps: float
    n: int
    seed: int
    estimator: str
    l1_error: float  # nan when the cell failed
    wall_time_s: float
    repeat: Optional[int] = None
    error: Optional[str] = None


def prepare_cell(cfg: SweepConfig, n: int, repeat: int):
    """Generate, corrupt, split and train for one cell; returns the pieces.

    Sub-seeds for generation, corruption, splitting and training are
    derived from the cell seed so the stages stay decorrelated.
    """
    cell_seed = mix_seed(cfg.base_seed, n, repeat)
    truth = noise_matrix(cfg.noise_kind, 2, cfg.eps)
    data = generate(cfg.gaussian, n, mix_seed(cell_seed, 1))
    noisy = corrupt(data, truth, mix_seed(cell_seed, 2))
    train, val = split_train_val(noisy, cfg.val_fraction, mix_seed(cell_seed, 3))
    model = train_classifier(train, val, seed=mix_seed(cell_seed, 4), **cfg.model_params)
    return cell_seed, truth, train, val, model


def run_cell(cfg: SweepConfig, n: int, repeat: int) -> list[CellRecord]:
    """Run every requested estimator for one cell; failures become nan records."""
    t0 = time.perf_counter()
    try:
        cell_seed, truth, train, _, model = prepare_cell(cfg, n, repeat)
        prep_error = None
    except Exception as exc:  # a failed cell must not abort the sweep
        cell_seed = mix_seed(cfg.base_seed, n, repeat)
        prep_error = f"{type(exc).__name__}: {exc}"
    prep_time = time.perf_counter() - t0
    records = []
    for name in cfg.estimators:
        if prep_error is not None:
            records.append(
                CellRecord(cfg.noise_kind, cfg.eps, n, cell_seed, name,
                           float("nan"), prep_time, repeat, prep_error)
            )
            continue
        t1 = time.perf_counter()
        try:
            report = ESTIMATORS[name](model, train, ground_truth=truth, seed=cell_seed)
            l1, msg = float(report.l1_error), None
        except Exception as exc:
            l1, msg = float("nan"), f"{type(exc).__name__}: {exc}"
        records.append(
            CellRecord(cfg.noise_kind, cfg.eps, n, cell_seed, name,
                       l1, prep_time + time.perf_counter() - t1, repeat, msg)
        )
    return records


def _cell_worker(payload):
    cfg, n, repeat = payload
    return run_cell(cfg, n, repeat)


@dataclass(frozen=True)
class SweepResult:
    config: SweepConfig
    records: tuple

    def aggregates(self) -> list[dict]:
        return aggregate_records(self.records, estimator_order=self.config.estimators)


def resolve_jobs(jobs: Optional[int]) -> int:
    env = os.environ.get("NOISYT_JOBS")
    if env is not None:
        return max(1, int(env))
    return max(1, jobs or 1)


def run_sweep(cfg: SweepConfig, jobs: Optional[int] = None) -> SweepResult:
    """Run all cells and return records in canonical (n, repeat, estimator) order."""
    cfg.validate()
    jobs = resolve_jobs(jobs)
    cells = [(cfg, n, r) for n in cfg.sample_sizes for r in range(cfg.repeats)]
    if jobs <= 1:
        batches = [_cell_worker(c) for c in cells]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            batches = list(pool.map(_cell_worker, cells))
    records = [rec for batch in batches for rec in batch]
    order = {name: i for i, name in enumerate(cfg.estimators)}
    records.sort(key=lambda r: (r.n, r.repeat, order[r.estimator]))
    return SweepResult(config=cfg, records=tuple(records))


def aggregate_records(records: Sequence[CellRecord], estimator_order=None) -> list[dict]:
    """Mean and population std of l1 error per (n, estimator), failures skipped."""
    if estimator_order is None:
        estimator_order = list(dict.fromkeys(r.estimator for r in records))
    order = {name: i for i, name in enumerate(estimator_order)}
    groups: dict = {}
    for r in records:
        groups.setdefault((r.n, r.estimator), []).append(r)
    out = []
    for (n, est) in sorted(groups, key=lambda k: (k[0], order.get(k[1], len(order)))):
        rs = groups[(n, est)]
        vals = np.array([r.l1_error for r in rs if np.isfinite(r.l1_error)])
        out.append(
            {
                "noise_kind": rs[0].noise_kind,
                "eps": rs[0].eps,
                "n": n,
                "estimator": est,
                "mean_l1_error": float(vals.mean()) if vals.size else float("nan"),
                "std_l1_error": float(vals.std()) if vals.size else float("nan"),
                "count": int(vals.size),
            }
        )
    return out


CELL_HEADER = ["noise", "eps", "n", "seed", "estimator", "l1_error", "wall_time_s"]
AGG_HEADER = ["noise", "eps", "n", "estimator", "mean_l1_error", "std_l1_error"]


def agg_path_for(path) -> Path:
    p = Path(path)
    return p.with_name(p.stem + "_agg" + (p.suffix or ".csv"))


def emit_csv(result: SweepResult | Sequence[CellRecord], path) -> tuple[Path, Path]:
    """Write per-cell records to ``path`` and aggregates to a sibling ``*_agg`` file."""
    records = result.records if isinstance(result, SweepResult) else tuple(result)
    estimator_order = (
        result.config.estimators if isinstance(result, SweepResult) else None
    )
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CELL_HEADER)
        for r in records:
            w.writerow(
                [r.noise_kind, format(r.eps, ".17g"), r.n, r.seed, r.estimator,
                 format(r.l1_error, ".17g"), format(r.wall_time_s, ".6f")]
            )
    apath = agg_path_for(path)
    with open(apath, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(AGG_HEADER)
        for a in aggregate_records(records, estimator_order):
            w.writerow(
                [a["noise_kind"], format(a["eps"], ".17g"), a["n"], a["estimator"],
                 format(a["mean_l1_error"], ".17g"), format(a["std_l1_error"], ".17g")]
            )
    return path, apath


def read_cells_csv(path) -> list[CellRecord]:
    """Parse a per-cell CSV back into records (repeat indices are not stored)."""
    records = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            records.append(
                CellRecord(
                    noise_kind=row["noise"],
                    eps=float(row["eps"]),
                    n=int(row["n"]),
                    seed=int(row["seed"]),
                    estimator=row["estimator"],
                    l1_error=float(row["l1_error"]),
                    wall_time_s=float(row["wall_time_s"]),
                )
            )
    return records


_COLORS = {"t": "#d62728", "dualt": "#1f77b4"}
_PLOT = {"width": 640, "height": 420, "ml": 70, "mr": 30, "mt": 42, "mb": 58}


def _fmt(v: float) -> str:
    return format(v, ".2f")


def emit_plot(result: SweepResult | Sequence[CellRecord], path, title="transition matrix estimation error") -> Path:
    """Render mean error curves (log-x, shaded +-1 std bands) as standalone SVG.

    Tick labels carry a ``data-value`` attribute with the exact axis value
    so the pixel-to-data mapping can be reconstructed from the file alone.
    """
    records = result.records if isinstance(result, SweepResult) else tuple(result)
    estimator_order = (
        list(result.config.estimators) if isinstance(result, SweepResult) else None
    )
    aggs = aggregate_records(records, estimator_order)
    finite = [a for a in aggs if np.isfinite(a["mean_l1_error"])]
    sizes = sorted({a["n"] for a in aggs})
    estimators = list(dict.fromkeys(a["estimator"] for a in aggs))
    g = _PLOT
    pw = g["width"] - g["ml"] - g["mr"]
    ph = g["height"] - g["mt"] - g["mb"]

    lo, hi = (np.log10(sizes[0]), np.log10(sizes[-1])) if sizes else (0.0, 1.0)

    def x_px(n):
        if hi == lo:
            return g["ml"] + pw / 2.0
        return g["ml"] + (np.log10(n) - lo) / (hi - lo) * pw

    ymax = max((a["mean_l1_error"] + a["std_l1_error"] for a in finite), default=1.0)
    ymax = max(ymax, 1e-9) * 1.05

    def y_px(v):
        return g["mt"] + (1.0 - v / ymax) * ph

    svg = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{g["width"]}" height="{g["height"]}" '
        f'viewBox="0 0 {g["width"]} {g["height"]}" font-family="sans-serif">',
        f'<rect width="{g["width"]}" height="{g["height"]}" fill="#ffffff"/>',
        f'<text x="{g["width"] / 2:.0f}" y="22" text-anchor="middle" font-size="14">{title}</text>',
    ]
    # y grid and ticks
    for i in range(6):
        v = ymax * i / 5.0
        y = y_px(v)
        svg.append(
            f'<line x1="{g["ml"]}" y1="{_fmt(y)}" x2="{g["ml"] + pw}" y2="{_fmt(y)}" '
            f'stroke="#dddddd" stroke-width="1"/>'
        )
        svg.append(
            f'<text class="ytick" data-value="{format(v, ".17g")}" x="{g["ml"] - 8}" '
            f'y="{_fmt(y)}" dy="4" text-anchor="end" font-size="11">{v:.3g}</text>'
        )
    # x ticks at each sample size
    for n in sizes:
        x = x_px(n)
        svg.append(
            f'<line x1="{_fmt(x)}" y1="{g["mt"] + ph}" x2="{_fmt(x)}" y2="{g["mt"] + ph + 5}" '
            f'stroke="#333333" stroke-width="1"/>'
        )
        svg.append(
            f'<text class="xtick" data-value="{n}" x="{_fmt(x)}" y="{g["mt"] + ph + 20}" '
            f'text-anchor="middle" font-size="11">{n}</text>'
        )
    svg.append(
        f'<text x="{g["ml"] + pw / 2:.0f}" y="{g["height"] - 12}" text-anchor="middle" '
        f'font-size="12">training sample size (log scale)</text>'
    )
    svg.append(
        f'<text x="16" y="{g["mt"] + ph / 2:.0f}" text-anchor="middle" font-size="12" '
        f'transform="rotate(-90, 16, {g["mt"] + ph / 2:.0f})">mean l1 estimation error</text>'
    )
    for est in estimators:
        color = _COLORS.get(est, "#555555")
        pts = [
            a for a in finite if a["estimator"] == est
        ]
        pts.sort(key=lambda a: a["n"])
        if len(pts) >= 2:
            upper = [(x_px(a["n"]), y_px(min(ymax, a["mean_l1_error"] + a["std_l1_error"]))) for a in pts]
            lower = [(x_px(a["n"]), y_px(max(0.0, a["mean_l1_error"] - a["std_l1_error"]))) for a in pts]
            band = " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in upper + lower[::-1])
            svg.append(f'<polygon id="band-{est}" points="{band}" fill="{color}" opacity="0.15"/>')
            line = " ".join(f"{_fmt(x_px(a['n']))},{_fmt(y_px(a['mean_l1_error']))}" for a in pts)
            svg.append(
                f'<polyline id="mean-{est}" points="{line}" fill="none" stroke="{color}" stroke-width="2"/>'
            )
        for a in pts:
            svg.append(
                f'<circle class="marker-{est}" cx="{_fmt(x_px(a["n"]))}" '
                f'cy="{_fmt(y_px(a["mean_l1_error"]))}" r="3" fill="{color}"/>'
            )
    # legend
    ly = g["mt"] + 8
    for est in estimators:
        color = _COLORS.get(est, "#555555")
        lx = g["ml"] + pw - 110
        svg.append(
            f'<line x1="{lx}" y1="{ly}" x2="{lx + 22}" y2="{ly}" stroke="{color}" stroke-width="2"/>'
        )
        svg.append(f'<text x="{lx + 28}" y="{ly + 4}" font-size="12">{est}</text>')
        ly += 18
    # axes
    svg.append(
        f'<line x1="{g["ml"]}" y1="{g["mt"]}" x2="{g["ml"]}" y2="{g["mt"] + ph}" '
        f'stroke="#333333" stroke-width="1"/>'
    )
    svg.append(
        f'<line x1="{g["ml"]}" y1="{g["mt"] + ph}" x2="{g["ml"] + pw}" y2="{g["mt"] + ph}" '
        f'stroke="#333333" stroke-width="1"/>'
    )
    svg.append("</svg>")
    path = Path(path)
    path.write_text("\n".join(svg) + "\n")
    return path
